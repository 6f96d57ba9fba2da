//! Pulling a program out of a model reply.

/// Contents of the first fenced code block. Without a fence, the whole
/// reply. `None` when there is nothing but whitespace, or the first fence
/// is never closed or is empty.
pub fn extract_program(reply: &str) -> Option<String> {
    let Some(open) = find_fence(reply, 0) else {
        let trimmed = reply.trim();
        return (!trimmed.is_empty()).then(|| format!("{trimmed}\n"));
    };
    // The info string (language tag) runs to the end of the fence line.
    let body_start = reply[open..].find('\n').map(|i| open + i + 1)?;
    let close = find_fence(reply, body_start)?;
    let body = &reply[body_start..close];
    if body.trim().is_empty() {
        return None;
    }
    let mut program = body.trim_end_matches([' ', '\t', '\n', '\r']).to_string();
    program.push('\n');
    Some(program)
}

/// Byte offset of the next line that starts with three backticks, after
/// optional indentation.
fn find_fence(text: &str, from: usize) -> Option<usize> {
    let mut pos = from;
    for line in text[from..].split_inclusive('\n') {
        let indent = line.len() - line.trim_start_matches([' ', '\t']).len();
        if line[indent..].starts_with("```") {
            return Some(pos + indent);
        }
        pos += line.len();
    }
    None
}
