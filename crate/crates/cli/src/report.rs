//! CSV rows and blocks. Numbers use Rust's `Display`, which is
//! locale-independent and round-trips exactly.

use desynclab::{Protocol, ProtocolParams};

pub const SUMMARY_HEADER: [&str; 14] = [
    "protocol",
    "W",
    "alpha",
    "b_thres",
    "sigma_delta_s",
    "T_s",
    "trials",
    "mean_cycles",
    "std_cycles",
    "model_k",
    "noise_limited",
    "conjecture_k",
    "bound_k",
    "within_one_std",
];

pub const TRIAL_HEADER: [&str; 9] = [
    "protocol",
    "W",
    "alpha",
    "b_thres",
    "trial",
    "seed",
    "converged",
    "network_cycles",
    "mean_node_cycles",
];

pub const TRAJECTORY_HEADER: [&str; 6] = ["protocol", "W", "alpha", "b_thres", "index", "sigma"];

pub const COMPARE_SUMMARY_HEADER: [&str; 7] = [
    "protocol",
    "b_thres",
    "W",
    "cells",
    "pearson_model",
    "pearson_comparator",
    "within_one_std_fraction",
];

/// One cell of the summary table. Absent values print as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub protocol: Protocol,
    pub params: ProtocolParams,
    pub trials: Option<usize>,
    pub sim_mean: Option<f64>,
    pub sim_std: Option<f64>,
    pub model_k: Option<usize>,
    pub noise_limited: Option<bool>,
    /// Scaled order conjecture, DESYNC only.
    pub conjecture_k: Option<f64>,
    /// Closed-form lower bound, PCO only; absent where the bound is singular.
    pub bound_k: Option<i64>,
}

impl ComparisonRow {
    pub fn new(protocol: Protocol, params: ProtocolParams) -> Self {
        ComparisonRow {
            protocol,
            params,
            trials: None,
            sim_mean: None,
            sim_std: None,
            model_k: None,
            noise_limited: None,
            conjecture_k: None,
            bound_k: None,
        }
    }

    /// `|model_k - sim_mean| <= sim_std`, when all three exist.
    pub fn within_one_std(&self) -> Option<bool> {
        match (self.model_k, self.sim_mean, self.sim_std) {
            (Some(k), Some(m), Some(s)) if m.is_finite() && s.is_finite() => {
                Some((k as f64 - m).abs() <= s)
            }
            _ => None,
        }
    }

    pub fn fields(&self) -> Vec<String> {
        let p = &self.params;
        vec![
            self.protocol.to_string(),
            p.w.to_string(),
            num(p.alpha),
            num(p.b_thres),
            num(p.sigma_delta_s),
            num(p.period_s),
            opt(self.trials),
            self.sim_mean.map(num).unwrap_or_default(),
            self.sim_std.map(num).unwrap_or_default(),
            opt(self.model_k),
            opt(self.noise_limited),
            self.conjecture_k.map(num).unwrap_or_default(),
            opt(self.bound_k),
            opt(self.within_one_std()),
        ]
    }
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        x.to_string()
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Several header-plus-rows blocks separated by blank lines.
#[derive(Debug, Default)]
pub struct CsvDoc {
    blocks: Vec<(Vec<String>, Vec<Vec<String>>)>,
}

impl CsvDoc {
    pub fn block(&mut self, header: &[&str], rows: Vec<Vec<String>>) {
        self.blocks
            .push((header.iter().map(|s| s.to_string()).collect(), rows));
    }

    pub fn render(&self) -> String {
        let mut out = Vec::new();
        for (i, (header, rows)) in self.blocks.iter().enumerate() {
            if i > 0 {
                out.push(b'\n');
            }
            let mut w = csv::WriterBuilder::new()
                .flexible(true)
                .from_writer(Vec::new());
            w.write_record(header).expect("in-memory write");
            for r in rows {
                w.write_record(r).expect("in-memory write");
            }
            out.extend(w.into_inner().expect("in-memory flush"));
        }
        String::from_utf8(out).expect("CSV fields are UTF-8")
    }
}
