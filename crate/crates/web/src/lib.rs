//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain function so the logic can be
//! tested natively.

use stepfix::evaluation::{edit_distance, pass_at_k};
use stepfix::repair_loop::{trace_rewards, LoopConfig, ReturnMode};
use wasm_bindgen::prelude::*;

/// pass@k for k = 1..=n.
pub fn pass_at_k_curve(n: u32, c: u32) -> Result<Vec<f64>, String> {
    if n == 0 {
        return Err("n must be at least 1".into());
    }
    (1..=n)
        .map(|k| pass_at_k(n.into(), c.into(), k.into()).map_err(|e| e.to_string()))
        .collect()
}

/// Parse rewards separated by commas or whitespace.
pub fn parse_rewards(text: &str) -> Result<Vec<f64>, String> {
    let rewards: Vec<f64> = text
        .split(|ch: char| ch == ',' || ch.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{t}` is not a number")),
        })
        .collect::<Result<_, _>>()?;
    if rewards.is_empty() {
        return Err("enter at least one reward".into());
    }
    Ok(rewards)
}

/// Run the refinement loop over a fixed reward sequence, `r[i]` being the
/// critic's score of version `x_i`. Returns the trajectory as JSON.
pub fn trace_json(rewards: &str, max_iterations: usize, max_patience: usize, best_of: bool) -> Result<String, String> {
    let rewards = parse_rewards(rewards)?;
    let cfg = LoopConfig {
        max_iterations,
        max_patience,
        return_mode: if best_of {
            ReturnMode::BestOfTrajectory
        } else {
            ReturnMode::Faithful
        },
        explicit_feedback: false,
    };
    let trajectory = trace_rewards(&rewards, &cfg).map_err(|e| e.to_string())?;
    serde_json::to_string(&trajectory).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = passAtKCurve)]
pub fn pass_at_k_curve_js(n: u32, c: u32) -> Result<Vec<f64>, JsError> {
    pass_at_k_curve(n, c).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = traceLoop)]
pub fn trace_loop_js(rewards: &str, max_iterations: usize, max_patience: usize, best_of: bool) -> Result<String, JsError> {
    trace_json(rewards, max_iterations, max_patience, best_of).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = editDistance)]
pub fn edit_distance_js(a: &str, b: &str) -> usize {
    edit_distance(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_is_monotone_and_ends_at_one() {
        let curve = pass_at_k_curve(10, 2).unwrap();
        assert_eq!(curve.len(), 10);
        assert!((curve[0] - 0.2).abs() < 1e-15);
        assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(curve[9], 1.0);
        assert!(pass_at_k_curve(0, 0).is_err());
        assert!(pass_at_k_curve(3, 4).is_err());
    }

    #[test]
    fn trace_rolls_back_after_patience() {
        let json = trace_json("5, 3 4\n3,3", 4, 2, false).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["returned_index"], 2);
        assert_eq!(v["exit_reason"], "patience");
        let best = trace_json("5 3 4 3 3", 4, 2, true).unwrap();
        assert!(best.contains("\"returned_index\":0"));
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(parse_rewards("1, x").unwrap_err().contains("`x`"));
        assert!(parse_rewards("  ").is_err());
        assert!(parse_rewards("1 NaN").is_err());
        assert!(trace_json("1 2", 3, 0, false).is_err());
    }
}
