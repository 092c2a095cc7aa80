use std::io::{BufRead, BufReader, Read, Write};
use std::os::unix::process::ExitStatusExt;
use std::path::Path;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use speclift_core::gen::TestPacket;

use crate::HarnessError;

pub const MAX_FRAME_LEN: usize = 65535;

/// Batches smaller than this per worker run in one process.
const MIN_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModuleVerdict {
    Accept,
    Reject,
    Crash,
    Timeout,
    ProtocolError,
}

impl ModuleVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            ModuleVerdict::Accept => "accept",
            ModuleVerdict::Reject => "reject",
            ModuleVerdict::Crash => "crash",
            ModuleVerdict::Timeout => "timeout",
            ModuleVerdict::ProtocolError => "protocol-error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub check: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessVerdict {
    pub packet_id: u64,
    pub verdict: ModuleVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceStep>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub tracing: bool,
    /// Per packet.
    pub timeout: Duration,
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tracing: false, timeout: Duration::from_millis(2_000), workers: 4 }
    }
}

pub fn encode_frame(bytes: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(4 + bytes.len());
    f.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    f.extend_from_slice(bytes);
    f
}

pub fn run_module(exe: &Path, packets: &[TestPacket], tracing: bool) -> Result<Vec<HarnessVerdict>, HarnessError> {
    run_module_with(exe, packets, &RunOptions { tracing, ..RunOptions::default() })
}

/// One verdict per packet, in input order.
pub fn run_module_with(exe: &Path, packets: &[TestPacket], opts: &RunOptions) -> Result<Vec<HarnessVerdict>, HarnessError> {
    if !exe.is_file() {
        return Err(HarnessError::MissingExecutable(exe.to_path_buf()));
    }
    if let Some(p) = packets.iter().find(|p| p.bytes.len() > MAX_FRAME_LEN) {
        return Err(HarnessError::FrameTooLarge { packet_id: p.id, len: p.bytes.len() });
    }
    let frames: Arc<[(u64, Vec<u8>)]> = packets.iter().map(|p| (p.id, encode_frame(&p.bytes))).collect();
    let workers = opts.workers.max(1).min(packets.len().div_ceil(MIN_CHUNK)).max(1);
    if workers == 1 {
        return run_range(exe, &frames, 0, frames.len(), opts);
    }
    let per = frames.len().div_ceil(workers);
    let results: Vec<Result<Vec<HarnessVerdict>, HarnessError>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let frames = Arc::clone(&frames);
                let (lo, hi) = (w * per, ((w + 1) * per).min(frames.len()));
                s.spawn(move || run_range(exe, &frames, lo, hi, opts))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread")).collect()
    });
    let mut out = Vec::with_capacity(packets.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn run_range(exe: &Path, frames: &Arc<[(u64, Vec<u8>)]>, lo: usize, hi: usize, opts: &RunOptions) -> Result<Vec<HarnessVerdict>, HarnessError> {
    let mut out = Vec::with_capacity(hi - lo);
    let mut next = lo;
    while next < hi {
        // Traces cannot be attributed across frames, so tracing runs one
        // frame per process.
        let end = if opts.tracing { next + 1 } else { hi };
        let got = session(exe, frames, next, end, opts)?;
        next += got.len();
        out.extend(got);
    }
    Ok(out)
}

fn describe_exit(st: ExitStatus) -> String {
    match (st.code(), st.signal()) {
        (_, Some(sig)) => format!("killed by signal {sig}"),
        (Some(c), None) => format!("exit status {c}"),
        (None, None) => "terminated".into(),
    }
}

fn wait_for(child: &mut Child, limit: Duration) -> Option<ExitStatus> {
    let deadline = Instant::now() + limit;
    loop {
        match child.try_wait() {
            Ok(Some(st)) => return Some(st),
            Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(1)),
            _ => {
                let _ = child.kill();
                return child.wait().ok();
            }
        }
    }
}

fn parse_trace(stderr: &str) -> Vec<TraceStep> {
    stderr
        .lines()
        .filter_map(|l| {
            let mut it = l.split(' ');
            match (it.next(), it.next(), it.next(), it.next()) {
                (Some("CHECK"), Some(id), Some(o @ ("0" | "1")), None) => Some(TraceStep { check: id.to_string(), passed: o == "1" }),
                _ => None,
            }
        })
        .collect()
}

/// Runs frames `lo..hi` through one process until they are answered or the
/// process fails; the failing frame gets the failure verdict and the
/// caller resumes after it.
fn session(exe: &Path, frames: &Arc<[(u64, Vec<u8>)]>, lo: usize, hi: usize, opts: &RunOptions) -> Result<Vec<HarnessVerdict>, HarnessError> {
    let mut cmd = Command::new(exe);
    if opts.tracing {
        cmd.arg("--trace");
    }
    let mut child = cmd
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(if opts.tracing { Stdio::piped() } else { Stdio::null() })
        .spawn()
        .map_err(|e| HarnessError::Spawn { path: exe.to_path_buf(), source: e })?;
    let mut stdin = child.stdin.take().expect("piped");
    let writer_frames = Arc::clone(frames);
    let writer = thread::spawn(move || {
        for (_, f) in &writer_frames[lo..hi] {
            if stdin.write_all(f).is_err() {
                return;
            }
        }
    });
    let stdout = child.stdout.take().expect("piped");
    let (tx, rx) = mpsc::channel::<Vec<u8>>();
    let reader = thread::spawn(move || {
        let mut r = BufReader::new(stdout);
        loop {
            let mut line = Vec::new();
            match r.read_until(b'\n', &mut line) {
                Ok(0) | Err(_) => return,
                Ok(_) => {
                    if tx.send(line).is_err() {
                        return;
                    }
                }
            }
        }
    });
    let err_reader = child.stderr.take().map(|mut e| {
        thread::spawn(move || {
            let mut s = Vec::new();
            let _ = e.read_to_end(&mut s);
            String::from_utf8_lossy(&s).into_owned()
        })
    });
    let mut out = Vec::with_capacity(hi - lo);
    let mut failed = false;
    for (id, _) in &frames[lo..hi] {
        let (verdict, detail) = match rx.recv_timeout(opts.timeout) {
            Ok(line) if line == b"1\n" => (ModuleVerdict::Accept, None),
            Ok(line) if line == b"0\n" => (ModuleVerdict::Reject, None),
            Ok(line) => (ModuleVerdict::ProtocolError, Some(format!("unexpected output {:?}", String::from_utf8_lossy(&line)))),
            Err(RecvTimeoutError::Timeout) => {
                (ModuleVerdict::Timeout, Some(format!("no answer within {} ms", opts.timeout.as_millis())))
            }
            Err(RecvTimeoutError::Disconnected) => match wait_for(&mut child, opts.timeout) {
                Some(st) if st.success() => (ModuleVerdict::ProtocolError, Some("exited before answering".into())),
                Some(st) => (ModuleVerdict::Crash, Some(describe_exit(st))),
                None => (ModuleVerdict::Crash, Some("process vanished".into())),
            },
        };
        failed = !matches!(verdict, ModuleVerdict::Accept | ModuleVerdict::Reject);
        out.push(HarnessVerdict { packet_id: *id, verdict, detail, trace: None });
        if failed {
            break;
        }
    }
    if failed {
        let _ = child.kill();
    }
    let _ = writer.join();
    let status = wait_for(&mut child, opts.timeout);
    let _ = reader.join();
    if let Some(h) = err_reader {
        let text = h.join().unwrap_or_default();
        let last = out.last_mut().expect("at least one frame");
        last.trace = Some(parse_trace(&text));
        // A clean answer followed by a crash still counts as a crash.
        if !failed {
            if let Some(st) = status.filter(|s| !s.success()) {
                last.verdict = ModuleVerdict::Crash;
                last.detail = Some(describe_exit(st));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_big_endian_length_prefixed() {
        assert_eq!(encode_frame(&[0xaa, 0xbb]), vec![0, 0, 0, 2, 0xaa, 0xbb]);
        assert_eq!(encode_frame(&[]), vec![0, 0, 0, 0]);
    }

    #[test]
    fn trace_lines_are_parsed_strictly() {
        let t = parse_trace("CHECK c1 1\nnoise\nCHECK c2 0\nCHECK c3 2\nCHECK c4 1 extra\n");
        assert_eq!(t, vec![TraceStep { check: "c1".into(), passed: true }, TraceStep { check: "c2".into(), passed: false }]);
    }
}
