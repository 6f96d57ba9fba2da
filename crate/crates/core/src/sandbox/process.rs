use std::io::{self, Read, Write};
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::{
    CompileOutcome, ExitKind, LanguageProfile, ProfileRegistry, ResourceLimits, RunResult, SandboxError, SuiteRunner,
    SuiteVerdict, TestCase, TestOutcome,
};

const STDERR_CAP: u64 = 64 << 10;
const POLL_INTERVAL: Duration = Duration::from_millis(5);

/// Runs programs for one language profile as child processes with
/// rlimits plus a watchdog that polls CPU and wall time.
#[derive(Debug, Clone)]
pub struct Sandbox {
    profile: LanguageProfile,
    workers: usize,
}

impl Sandbox {
    pub fn new(profile: LanguageProfile) -> Self {
        Self { profile, workers: 1 }
    }

    pub fn from_registry(registry: &ProfileRegistry, name: &str) -> Result<Self, SandboxError> {
        let profile = registry.get(name)?.clone();
        profile.validate(name)?;
        Ok(Self::new(profile))
    }

    /// Number of tests of one suite executed concurrently.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn profile(&self) -> &LanguageProfile {
        &self.profile
    }

    pub fn compile_check(&self, source: &str) -> Result<CompileOutcome, SandboxError> {
        if source.trim().is_empty() && self.profile.empty_source_is_ce {
            return Ok(CompileOutcome::CompileError("empty source".into()));
        }
        let Some(check) = &self.profile.check else {
            return Ok(CompileOutcome::Ok);
        };
        let dir = tempfile::tempdir()?;
        let path = self.write_source(dir.path(), source)?;
        let argv = LanguageProfile::expand(check, &path);
        let output = Command::new(&argv[0])
            .args(&argv[1..])
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .output()
            .map_err(|e| SandboxError::Infrastructure(format!("cannot spawn `{}`: {e}", argv[0])))?;
        if output.status.success() {
            Ok(CompileOutcome::Ok)
        } else {
            Ok(CompileOutcome::CompileError(first_error_line(&output.stderr, &output.stdout)))
        }
    }

    pub fn execute(&self, source: &str, test: &TestCase, limits: &ResourceLimits) -> Result<RunResult, SandboxError> {
        limits.validate()?;
        let dir = tempfile::tempdir()?;
        let path = self.write_source(dir.path(), source)?;
        let argv = LanguageProfile::expand(&self.profile.run, &path);
        let run = run_limited(&argv, dir.path(), &test.input, limits)?;

        let exit_kind = match run.termination {
            Termination::Watchdog => ExitKind::KilledTime,
            _ if run.cpu_time_ms > limits.cpu_time_ms => ExitKind::KilledTime,
            Termination::Signal(sig) if sig == libc::SIGXCPU => ExitKind::KilledTime,
            Termination::Signal(_) if run.peak_memory_bytes >= limits.memory_bytes => ExitKind::KilledMemory,
            Termination::Signal(sig) => ExitKind::Crashed {
                description: format!("terminated by signal {sig}"),
            },
            Termination::Exited(code) if code != 0 && self.is_memory_failure(&run.stderr, run.peak_memory_bytes, limits) => {
                ExitKind::KilledMemory
            }
            Termination::Exited(code) => ExitKind::Normal { code },
        };
        Ok(RunResult {
            stdout: run.stdout,
            stderr: run.stderr,
            exit_kind,
            cpu_time_ms: run.cpu_time_ms,
            peak_memory_bytes: run.peak_memory_bytes,
        })
    }

    fn is_memory_failure(&self, stderr: &[u8], peak: u64, limits: &ResourceLimits) -> bool {
        if peak >= limits.memory_bytes {
            return true;
        }
        let text = String::from_utf8_lossy(stderr);
        self.profile.memory_error_markers.iter().any(|m| text.contains(m.as_str()))
    }

    fn write_source(&self, dir: &Path, source: &str) -> Result<std::path::PathBuf, SandboxError> {
        let path = dir.join(format!("main.{}", self.profile.extension));
        std::fs::write(&path, source)?;
        Ok(path)
    }
}

impl SuiteRunner for Sandbox {
    fn run_suite(&self, source: &str, tests: &[TestCase], limits: &ResourceLimits) -> Result<SuiteVerdict, SandboxError> {
        if tests.is_empty() {
            return Err(SandboxError::EmptySuite);
        }
        if let CompileOutcome::CompileError(diagnostic) = self.compile_check(source)? {
            return Ok(SuiteVerdict::compile_error(diagnostic));
        }

        let next = AtomicUsize::new(0);
        let slots: Vec<_> = (0..tests.len()).map(|_| std::sync::Mutex::new(None)).collect();
        thread::scope(|scope| {
            for _ in 0..self.workers.min(tests.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(test) = tests.get(i) else { break };
                    let result = self.execute(source, test, limits).map(|run| TestOutcome {
                        test_id: test.id.clone(),
                        status: run.classify(&test.expected_output),
                        cpu_time_ms: run.cpu_time_ms,
                        peak_memory_bytes: run.peak_memory_bytes,
                    });
                    *slots[i].lock().unwrap() = Some(result);
                });
            }
        });

        let outcomes = slots
            .into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("every test slot is filled"))
            .collect::<Result<Vec<_>, _>>()?;
        SuiteVerdict::from_outcomes(outcomes)
    }
}

fn first_error_line(stderr: &[u8], stdout: &[u8]) -> String {
    let text = String::from_utf8_lossy(if stderr.is_empty() { stdout } else { stderr });
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    lines
        .iter()
        .find(|l| l.contains("Error:") || l.starts_with("error"))
        .or(lines.last())
        .map(|l| l.to_string())
        .unwrap_or_else(|| "compilation failed".into())
}

enum Termination {
    Exited(i32),
    Signal(i32),
    Watchdog,
}

struct RawRun {
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    termination: Termination,
    cpu_time_ms: u64,
    peak_memory_bytes: u64,
}

fn run_limited(argv: &[String], cwd: &Path, input: &[u8], limits: &ResourceLimits) -> Result<RawRun, SandboxError> {
    // The rlimit is a coarse backstop; the watchdog enforces the millisecond limit.
    let cpu_secs = limits.cpu_time_ms.div_ceil(1000) + 1;
    let memory = limits.memory_bytes;

    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .current_dir(cwd)
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    unsafe {
        command.pre_exec(move || {
            set_rlimit(libc::RLIMIT_CPU, cpu_secs, cpu_secs + 1)?;
            set_rlimit(libc::RLIMIT_AS, memory, memory)?;
            set_rlimit(libc::RLIMIT_CORE, 0, 0)?;
            Ok(())
        });
    }
    let mut child = command
        .spawn()
        .map_err(|e| SandboxError::Infrastructure(format!("cannot spawn `{}`: {e}", argv[0])))?;
    let pid = child.id() as libc::pid_t;
    let started = Instant::now();

    let mut stdin = child.stdin.take().expect("stdin is piped");
    let input = input.to_vec();
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let stdout = child.stdout.take().expect("stdout is piped");
    let stderr = child.stderr.take().expect("stderr is piped");
    let output_cap = limits.output_bytes;
    let out_reader = thread::spawn(move || read_capped(stdout, output_cap));
    let err_reader = thread::spawn(move || read_capped(stderr, STDERR_CAP));

    let exited = Arc::new(AtomicBool::new(false));
    let killed = Arc::new(AtomicBool::new(false));
    let watchdog = {
        let exited = Arc::clone(&exited);
        let killed = Arc::clone(&killed);
        let cpu_limit = limits.cpu_time_ms;
        let wall_limit = Duration::from_millis(limits.wall_time_ms);
        thread::spawn(move || {
            while !exited.load(Ordering::Acquire) {
                let over_wall = started.elapsed() > wall_limit;
                let over_cpu = proc_cpu_time_ms(pid).is_some_and(|ms| ms > cpu_limit);
                if over_wall || over_cpu {
                    killed.store(true, Ordering::Release);
                    unsafe { libc::kill(-pid, libc::SIGKILL) };
                    break;
                }
                thread::sleep(POLL_INTERVAL);
            }
        })
    };

    // Wait without reaping so the pid stays valid until the watchdog is done.
    let wait_result = wait_exited_no_reap(pid);
    exited.store(true, Ordering::Release);
    let _ = watchdog.join();
    unsafe { libc::kill(-pid, libc::SIGKILL) };
    let (status, usage) = reap(pid)?;
    wait_result?;

    let _ = writer.join();
    let stdout = out_reader
        .join()
        .map_err(|_| SandboxError::Infrastructure("stdout reader panicked".into()))??;
    let stderr = err_reader
        .join()
        .map_err(|_| SandboxError::Infrastructure("stderr reader panicked".into()))??;

    let termination = if killed.load(Ordering::Acquire) {
        Termination::Watchdog
    } else if libc::WIFSIGNALED(status) {
        Termination::Signal(libc::WTERMSIG(status))
    } else {
        Termination::Exited(libc::WEXITSTATUS(status))
    };
    let cpu_time_ms = timeval_ms(usage.ru_utime) + timeval_ms(usage.ru_stime);
    // ru_maxrss is reported in kilobytes on Linux.
    let peak_memory_bytes = (usage.ru_maxrss.max(0) as u64) * 1024;
    Ok(RawRun {
        stdout,
        stderr,
        termination,
        cpu_time_ms,
        peak_memory_bytes,
    })
}

#[cfg(all(target_os = "linux", target_env = "gnu"))]
type RlimitResource = libc::__rlimit_resource_t;
#[cfg(not(all(target_os = "linux", target_env = "gnu")))]
type RlimitResource = libc::c_int;

fn set_rlimit(resource: RlimitResource, soft: u64, hard: u64) -> io::Result<()> {
    let lim = libc::rlimit {
        rlim_cur: soft as libc::rlim_t,
        rlim_max: hard as libc::rlim_t,
    };
    if unsafe { libc::setrlimit(resource, &lim) } != 0 {
        return Err(io::Error::last_os_error());
    }
    Ok(())
}

fn read_capped<R: Read>(mut reader: R, cap: u64) -> io::Result<Vec<u8>> {
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        let room = (cap as usize).saturating_sub(kept.len());
        kept.extend_from_slice(&buf[..n.min(room)]);
    }
    Ok(kept)
}

fn wait_exited_no_reap(pid: libc::pid_t) -> Result<(), SandboxError> {
    loop {
        let mut info: libc::siginfo_t = unsafe { std::mem::zeroed() };
        let rc = unsafe { libc::waitid(libc::P_PID, pid as libc::id_t, &mut info, libc::WEXITED | libc::WNOWAIT) };
        if rc == 0 {
            return Ok(());
        }
        let err = io::Error::last_os_error();
        if err.kind() != io::ErrorKind::Interrupted {
            return Err(SandboxError::Infrastructure(format!("waitid failed: {err}")));
        }
    }
}

fn reap(pid: libc::pid_t) -> Result<(libc::c_int, libc::rusage), SandboxError> {
    loop {
        let mut status = 0;
        let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
        let rc = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
        if rc == pid {
            return Ok((status, usage));
        }
        let err = io::Error::last_os_error();
        if err.kind() != io::ErrorKind::Interrupted {
            return Err(SandboxError::Infrastructure(format!("wait4 failed: {err}")));
        }
    }
}

fn timeval_ms(tv: libc::timeval) -> u64 {
    (tv.tv_sec.max(0) as u64) * 1000 + (tv.tv_usec.max(0) as u64) / 1000
}

/// CPU time (user + system) of a live process, from /proc.
fn proc_cpu_time_ms(pid: libc::pid_t) -> Option<u64> {
    let stat = std::fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    let rest = &stat[stat.rfind(')')? + 1..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let utime: u64 = fields.get(11)?.parse().ok()?;
    let stime: u64 = fields.get(12)?.parse().ok()?;
    let ticks = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    if ticks <= 0 {
        return None;
    }
    Some((utime + stime) * 1000 / ticks as u64)
}
