//! Pass/fail bookkeeping for the end-to-end acceptance run.

use std::any::Any;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// Outcome of one criterion: a short measurement summary, or why it failed.
pub type Outcome = Result<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<Line>,
}

fn panic_message(p: Box<dyn Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panicked".to_string()
    }
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs one criterion, printing its PASS/FAIL line. A panic counts as a
    /// failure and does not stop later criteria.
    pub fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) -> bool {
        let start = Instant::now();
        let hook = panic::take_hook();
        panic::set_hook(Box::new(|_| {}));
        let result = panic::catch_unwind(AssertUnwindSafe(f));
        panic::set_hook(hook);
        let (passed, detail) = match result {
            Ok(Ok(d)) => (true, d),
            Ok(Err(d)) => (false, d),
            Err(p) => (false, format!("panic: {}", panic_message(p))),
        };
        let line = Line {
            name: name.to_string(),
            passed,
            detail,
            elapsed: start.elapsed(),
        };
        println!("{}", format_line(&line));
        self.lines.push(line);
        passed
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|l| !l.passed).count()
    }

    /// Summary line; the process exit code is 1 when anything failed.
    pub fn finish(self) -> ! {
        let failed = self.failures();
        println!(
            "\nacceptance: {} passed, {} failed, {} total",
            self.lines.len() - failed,
            failed,
            self.lines.len()
        );
        std::process::exit(i32::from(failed > 0))
    }
}

pub fn format_line(l: &Line) -> String {
    format!(
        "{} {} ({:.2}s): {}",
        if l.passed { "PASS" } else { "FAIL" },
        l.name,
        l.elapsed.as_secs_f64(),
        l.detail
    )
}

/// `Ok(())` when `cond` holds, otherwise `Err(msg())`.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Whether `value` lies within `target ± tolerance`.
pub fn within(value: f64, target: f64, tolerance: f64) -> bool {
    (value - target).abs() <= tolerance
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failures_and_panics_are_counted() {
        let mut r = Report::new();
        assert!(r.check("ok", || Ok("fine".into())));
        assert!(!r.check("err", || Err("bad".into())));
        assert!(!r.check("boom", || panic!("kaput")));
        assert_eq!(r.failures(), 2);
        assert_eq!(r.lines()[2].detail, "panic: kaput");
        assert!(format_line(&r.lines()[1]).starts_with("FAIL err ("));
    }

    #[test]
    fn tolerance_is_inclusive() {
        assert!(within(0.79, 0.84, 0.05 + 1e-12));
        assert!(!within(0.78, 0.84, 0.05));
        assert!(ensure(true, || unreachable!()).is_ok());
        assert_eq!(ensure(false, || "x".into()), Err("x".to_string()));
    }
}
