#![allow(dead_code)]

use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rmcontrast"))
}

pub fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("rmcontrast runs")
}

pub fn stdout_line<'a>(out: &'a Output, prefix: &str) -> Option<&'a str> {
    std::str::from_utf8(&out.stdout)
        .ok()?
        .lines()
        .find_map(|l| l.strip_prefix(prefix))
}

pub fn describe(out: &Output) -> String {
    format!(
        "exit {:?}; stdout: {}; stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout).trim(),
        String::from_utf8_lossy(&out.stderr).trim()
    )
}

pub struct MockProcess {
    child: Child,
    pub url: String,
}

impl MockProcess {
    pub fn start(canned: &Path, dir: &Path) -> MockProcess {
        Self::start_with(canned, dir, &[])
    }

    pub fn start_with(canned: &Path, dir: &Path, extra: &[&str]) -> MockProcess {
        let url_file = dir.join("mock.url");
        let child = bin()
            .args(["mock-serve", "--addr", "127.0.0.1:0", "--canned"])
            .arg(canned)
            .args(extra)
            .arg("--url-file")
            .arg(&url_file)
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .expect("mock-serve starts");
        let deadline = Instant::now() + Duration::from_secs(20);
        loop {
            if let Ok(url) = std::fs::read_to_string(&url_file) {
                return MockProcess { child, url };
            }
            assert!(Instant::now() < deadline, "mock-serve did not report its URL");
            std::thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn stop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for MockProcess {
    fn drop(&mut self) {
        self.stop();
    }
}
