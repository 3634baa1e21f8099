use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

pub const LOG_HEADER: &str = "iteration,epoch,gen_loss,disc_loss,l1_term,adv_term,wall_clock_s";

/// Losses recorded after one optimizer iteration. `l1_term` is the
/// unweighted mean absolute error; `wall_clock_s` counts seconds since the
/// training loop started.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogEntry {
    pub iteration: u64,
    pub epoch: usize,
    pub gen_loss: f64,
    pub disc_loss: f64,
    pub l1_term: f64,
    pub adv_term: f64,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    pub fn push(&mut self, e: LogEntry) {
        self.entries.push(e);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(LOG_HEADER);
        s.push('\n');
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{:.3}",
                e.iteration, e.epoch, e.gen_loss, e.disc_loss, e.l1_term, e.adv_term, e.wall_clock_s
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::atomic::write_atomic(path, self.to_csv().as_bytes())
    }

    /// Mean of `f` over a window of entries.
    pub fn window_mean(&self, range: std::ops::Range<usize>, f: impl Fn(&LogEntry) -> f64) -> f64 {
        let w = &self.entries[range];
        w.iter().map(f).sum::<f64>() / w.len().max(1) as f64
    }
}
