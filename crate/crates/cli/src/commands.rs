//! Subcommand bodies. Each returns the text to emit plus any warnings.

use std::collections::BTreeMap;

use desynclab::analytic::{
    desync_order_conjecture, estimate_cycles, pco_lower_bound, sigma_desync, sigma_pco,
    INITIAL_SIGMA,
};
use desynclab::apps::{
    bandwidth_monte_carlo, bandwidth_per_node, bandwidth_uniform_swap, solve_period, ChurnScenario,
};
use desynclab::sim::{normality_diagnostic, run_grid, GridSummary, SimConfig};
use desynclab::stats::{lsq_scale, mean, pearson};
use desynclab::{Error, Protocol, ProtocolParams};
use rand::SeedableRng;

use crate::report::{
    num, ComparisonRow, CsvDoc, COMPARE_SUMMARY_HEADER, SUMMARY_HEADER, TRAJECTORY_HEADER,
    TRIAL_HEADER,
};
use crate::settings::Settings;
use crate::CliError;

#[derive(Debug, Default)]
pub struct Output {
    pub text: String,
    pub warnings: Vec<String>,
}

fn sim_config(s: &Settings, protocol: Protocol, params: ProtocolParams) -> SimConfig {
    let mut c = SimConfig::new(protocol, params, s.seed);
    c.max_cycles = s.max_cycles;
    c.detection_window = s.detection_window;
    c
}

fn run_cells(s: &Settings) -> Result<Vec<GridSummary>, CliError> {
    let cells: Vec<SimConfig> = s
        .cells()
        .into_iter()
        .map(|(p, c)| sim_config(s, p, c))
        .collect();
    Ok(run_grid(&cells, s.trials, s.seed)?)
}

fn sim_row(g: &GridSummary) -> ComparisonRow {
    let mut row = ComparisonRow::new(g.protocol, g.params);
    row.trials = Some(g.n_trials);
    row.sim_mean = Some(g.mean_cycles);
    row.sim_std = Some(g.std_cycles);
    row
}

fn non_converged_warnings(grid: &[GridSummary], out: &mut Vec<String>) {
    for g in grid.iter().filter(|g| g.non_converged > 0) {
        out.push(format!(
            "{} W={} alpha={} b={}: {} of {} trials hit max_cycles and are excluded",
            g.protocol, g.params.w, g.params.alpha, g.params.b_thres, g.non_converged, g.n_trials
        ));
    }
}

pub fn simulate(s: &Settings, per_trial: bool) -> Result<Output, CliError> {
    if s.trials < 2 {
        return Err(CliError::usage("trials must be at least 2"));
    }
    let grid = run_cells(s)?;
    let mut doc = CsvDoc::default();
    doc.block(
        &SUMMARY_HEADER,
        grid.iter().map(|g| sim_row(g).fields()).collect(),
    );
    if per_trial {
        let rows = grid
            .iter()
            .flat_map(|g| {
                g.trials.iter().enumerate().map(move |(i, t)| {
                    vec![
                        g.protocol.to_string(),
                        g.params.w.to_string(),
                        num(g.params.alpha),
                        num(g.params.b_thres),
                        i.to_string(),
                        t.seed.to_string(),
                        t.converged.to_string(),
                        t.network_cycles.map(|c| c.to_string()).unwrap_or_default(),
                        t.mean_node_cycles().map(num).unwrap_or_default(),
                    ]
                })
            })
            .collect();
        doc.block(&TRIAL_HEADER, rows);
    }
    let mut warnings = Vec::new();
    non_converged_warnings(&grid, &mut warnings);
    Ok(Output {
        text: doc.render(),
        warnings,
    })
}

fn model_row(
    s: &Settings,
    protocol: Protocol,
    params: ProtocolParams,
    row: &mut ComparisonRow,
) -> Result<(), CliError> {
    let est = estimate_cycles(protocol, &params, s.pco_index_mode)?;
    row.model_k = Some(est.cycles);
    row.noise_limited = Some(est.noise_limited);
    if protocol == Protocol::Pco {
        row.bound_k = match pco_lower_bound(params.alpha, params.w, params.b_thres) {
            Ok(b) => Some(b.cycles),
            Err(Error::SingularBound) => None,
            Err(e) => return Err(e.into()),
        };
    }
    Ok(())
}

fn bound_warnings(rows: &[ComparisonRow], out: &mut Vec<String>) {
    for r in rows.iter().filter(|r| r.protocol == Protocol::Pco) {
        let p = &r.params;
        match pco_lower_bound(p.alpha, p.w, p.b_thres) {
            Ok(b) if b.assumption_violated => out.push(format!(
                "pco W={} alpha={}: lower bound assumes 1 - 1/W > alpha",
                p.w, p.alpha
            )),
            Err(Error::SingularBound) => out.push(format!(
                "pco W={} alpha={}: lower bound is singular ((1 - alpha) W = 1)",
                p.w, p.alpha
            )),
            _ => {}
        }
    }
}

pub fn estimate(s: &Settings, trajectory: bool, conjecture_scale: f64) -> Result<Output, CliError> {
    let mut rows = Vec::new();
    let mut traj = Vec::new();
    for (protocol, params) in s.cells() {
        let mut row = ComparisonRow::new(protocol, params);
        model_row(s, protocol, params, &mut row)?;
        if protocol == Protocol::Desync {
            row.conjecture_k = Some(desync_order_conjecture(
                params.alpha,
                params.w,
                params.b_thres,
                conjecture_scale,
            ));
        }
        if trajectory {
            let est = estimate_cycles(protocol, &params, s.pco_index_mode)?;
            for (i, v) in est.trajectory.values.iter().enumerate() {
                traj.push(vec![
                    protocol.to_string(),
                    params.w.to_string(),
                    num(params.alpha),
                    num(params.b_thres),
                    (i + 1).to_string(),
                    num(*v),
                ]);
            }
        }
        rows.push(row);
    }
    let mut warnings = Vec::new();
    bound_warnings(&rows, &mut warnings);
    let mut doc = CsvDoc::default();
    doc.block(
        &SUMMARY_HEADER,
        rows.iter().map(ComparisonRow::fields).collect(),
    );
    if trajectory {
        doc.block(&TRAJECTORY_HEADER, traj);
    }
    Ok(Output {
        text: doc.render(),
        warnings,
    })
}

/// Pearson coefficients and agreement fraction for one group of cells that
/// differ only in alpha.
struct GroupStats {
    cells: usize,
    r_model: f64,
    r_comparator: f64,
    within: f64,
}

fn group_stats(rows: &[&ComparisonRow]) -> GroupStats {
    let sim: Vec<f64> = rows
        .iter()
        .map(|r| r.sim_mean.unwrap_or(f64::NAN))
        .collect();
    let model: Vec<f64> = rows.iter().map(|r| r.model_k.unwrap_or(0) as f64).collect();
    let comparator: Vec<f64> = rows
        .iter()
        .map(|r| match r.protocol {
            Protocol::Desync => r.conjecture_k.unwrap_or(f64::NAN),
            Protocol::Pco => r.bound_k.map(|b| b as f64).unwrap_or(f64::NAN),
        })
        .collect();
    let within = rows
        .iter()
        .filter(|r| r.within_one_std() == Some(true))
        .count();
    GroupStats {
        cells: rows.len(),
        r_model: pearson(&model, &sim),
        r_comparator: if comparator.iter().any(|c| c.is_nan()) {
            f64::NAN
        } else {
            pearson(&comparator, &sim)
        },
        within: within as f64 / rows.len() as f64,
    }
}

/// Correlation and coverage for one (protocol, b_thres, W) group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub protocol: Protocol,
    pub b_thres: f64,
    /// `None` for the average over W.
    pub w: Option<usize>,
    pub cells: usize,
    pub r_model: f64,
    pub r_comparator: f64,
    pub within: f64,
}

/// Output of `compare`, kept structured for callers that need the numbers.
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub summary: Vec<GroupSummary>,
}

pub fn compare_data(s: &Settings) -> Result<(Comparison, Vec<String>), CliError> {
    if s.alphas.len() < 3 {
        return Err(CliError::usage(
            "compare needs at least 3 alpha values for a correlation",
        ));
    }
    if s.trials < 2 {
        return Err(CliError::usage("trials must be at least 2"));
    }
    let grid = run_cells(s)?;
    let mut warnings = Vec::new();
    non_converged_warnings(&grid, &mut warnings);
    let mut rows: Vec<ComparisonRow> = grid.iter().map(sim_row).collect();
    for row in rows.iter_mut() {
        model_row(s, row.protocol, row.params, row)?;
    }

    // Group by (protocol, b, W); rows are already in sorted-key order.
    let mut groups: BTreeMap<(Protocol, u64, usize), Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups
            .entry((r.protocol, r.params.b_thres.to_bits(), r.params.w))
            .or_default()
            .push(i);
    }
    for ((protocol, _, _), idx) in &groups {
        if *protocol != Protocol::Desync {
            continue;
        }
        let raw: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let p = &rows[i].params;
                desync_order_conjecture(p.alpha, p.w, p.b_thres, 1.0)
            })
            .collect();
        let sim: Vec<f64> = idx
            .iter()
            .map(|&i| rows[i].sim_mean.unwrap_or(f64::NAN))
            .collect();
        let scale = lsq_scale(&raw, &sim);
        for (&i, c) in idx.iter().zip(raw) {
            rows[i].conjecture_k = Some(scale * c);
        }
    }
    bound_warnings(&rows, &mut warnings);

    let mut summary = Vec::new();
    let mut per_b: BTreeMap<(Protocol, u64), Vec<GroupStats>> = BTreeMap::new();
    for ((protocol, b_bits, w), idx) in &groups {
        let members: Vec<&ComparisonRow> = idx.iter().map(|&i| &rows[i]).collect();
        let g = group_stats(&members);
        let b = f64::from_bits(*b_bits);
        if g.r_model.is_nan() {
            warnings.push(format!(
                "{protocol} b={b} W={w}: model/simulation correlation undefined (zero variance)"
            ));
        }
        summary.push(GroupSummary {
            protocol: *protocol,
            b_thres: b,
            w: Some(*w),
            cells: g.cells,
            r_model: g.r_model,
            r_comparator: g.r_comparator,
            within: g.within,
        });
        per_b.entry((*protocol, *b_bits)).or_default().push(g);
    }
    for ((protocol, b_bits), gs) in &per_b {
        let cells: usize = gs.iter().map(|g| g.cells).sum();
        let within = gs.iter().map(|g| g.within * g.cells as f64).sum::<f64>() / cells as f64;
        let r_model = mean(&gs.iter().map(|g| g.r_model).collect::<Vec<_>>());
        let r_cmp = mean(&gs.iter().map(|g| g.r_comparator).collect::<Vec<_>>());
        summary.push(GroupSummary {
            protocol: *protocol,
            b_thres: f64::from_bits(*b_bits),
            w: None,
            cells,
            r_model,
            r_comparator: r_cmp,
            within,
        });
    }
    summary.sort_by_key(|g| (g.protocol, g.b_thres.to_bits(), g.w.is_none(), g.w));
    Ok((Comparison { rows, summary }, warnings))
}

pub fn compare(s: &Settings) -> Result<Output, CliError> {
    let (cmp, warnings) = compare_data(s)?;
    let mut doc = CsvDoc::default();
    doc.block(
        &SUMMARY_HEADER,
        cmp.rows.iter().map(ComparisonRow::fields).collect(),
    );
    let within_all = cmp
        .rows
        .iter()
        .filter(|r| r.within_one_std() == Some(true))
        .count() as f64
        / cmp.rows.len() as f64;
    let mut summary: Vec<Vec<String>> = cmp
        .summary
        .iter()
        .map(|g| {
            vec![
                g.protocol.to_string(),
                num(g.b_thres),
                g.w.map(|w| w.to_string()).unwrap_or_else(|| "mean".into()),
                g.cells.to_string(),
                num(g.r_model),
                num(g.r_comparator),
                num(g.within),
            ]
        })
        .collect();
    summary.push(vec![
        "all".into(),
        String::new(),
        String::new(),
        cmp.rows.len().to_string(),
        String::new(),
        String::new(),
        num(within_all),
    ]);
    doc.block(&COMPARE_SUMMARY_HEADER, summary);
    Ok(Output {
        text: doc.render(),
        warnings,
    })
}

pub struct BandwidthArgs {
    pub b_wsn_bps: f64,
    pub t_swap_s: f64,
    pub t_swap_range: Option<(f64, f64)>,
    pub mc_draws: usize,
}

pub fn apps_bandwidth(s: &Settings, a: &BandwidthArgs) -> Result<Output, CliError> {
    if !(a.t_swap_s > 0.0 && a.b_wsn_bps >= 0.0) {
        return Err(CliError::usage(
            "t-swap-s must be positive and b-wsn-bps non-negative",
        ));
    }
    let mut header = vec![
        "protocol",
        "W",
        "alpha",
        "b_thres",
        "T_s",
        "T_swap_s",
        "k",
        "bandwidth_kbps",
        "flags",
    ];
    if a.t_swap_range.is_some() {
        header.extend(["uniform_swap_kbps", "monte_carlo_kbps"]);
    }
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (protocol, params) in s.cells() {
        let sc = ChurnScenario {
            w: params.w,
            b_wsn_bps: a.b_wsn_bps,
            period_s: params.period_s,
            t_swap_s: a.t_swap_s,
            protocol,
        };
        let bw = bandwidth_per_node(&sc, &params, s.pco_index_mode)?;
        let mut flags = Vec::new();
        if bw.clamped {
            flags.push("[1]");
        }
        if bw.noise_limited {
            flags.push("[2]");
        }
        let mut row = vec![
            protocol.to_string(),
            params.w.to_string(),
            num(params.alpha),
            num(params.b_thres),
            num(params.period_s),
            num(a.t_swap_s),
            bw.cycles.to_string(),
            format!("{:.2}", bw.bps / 1000.0),
            flags.join(" "),
        ];
        if let Some((lo, hi)) = a.t_swap_range {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s.seed);
            row.push(format!(
                "{:.2}",
                bandwidth_uniform_swap(bw.cycles, &sc, lo, hi) / 1000.0
            ));
            row.push(format!(
                "{:.2}",
                bandwidth_monte_carlo(bw.cycles, &sc, lo, hi, a.mc_draws, &mut rng) / 1000.0
            ));
        }
        rows.push(row);
    }
    if rows.iter().any(|r| r[8].contains("[1]")) {
        notes.push(
            "# [1] k T >= T_swap: the network never settles, bandwidth clamped to 0".to_string(),
        );
    }
    if rows.iter().any(|r| r[8].contains("[2]")) {
        notes.push(
            "# [2] noise floor above the confidence target: k is the floor-reaching estimate"
                .to_string(),
        );
    }
    let mut doc = CsvDoc::default();
    doc.block(&header, rows);
    let mut text = doc.render();
    for n in notes {
        text.push_str(&n);
        text.push('\n');
    }
    Ok(Output {
        text,
        warnings: Vec::new(),
    })
}

pub fn apps_period(s: &Settings, t_sstate_s: f64, renormalize: bool) -> Result<Output, CliError> {
    let header = [
        "protocol",
        "W",
        "alpha",
        "b_thres",
        "T_sstate_s",
        "T_s",
        "k",
        "iterations",
        "converged",
        "previous_T_s",
    ];
    let mut rows = Vec::new();
    let mut any_unconverged = false;
    for (protocol, params) in s.cells() {
        let sol = solve_period(t_sstate_s, &params, protocol, s.pco_index_mode, renormalize)?;
        any_unconverged |= !sol.converged;
        rows.push(vec![
            protocol.to_string(),
            params.w.to_string(),
            num(params.alpha),
            num(params.b_thres),
            num(t_sstate_s),
            format!("{:.2}", sol.period_s),
            sol.cycles.to_string(),
            sol.iterations.to_string(),
            sol.converged.to_string(),
            format!("{:.2}", sol.previous_s),
        ]);
    }
    let mut doc = CsvDoc::default();
    doc.block(&header, rows);
    let mut text = doc.render();
    if any_unconverged {
        text.push_str("# fixed point not reached: the last two iterates are reported\n");
    }
    Ok(Output {
        text,
        warnings: Vec::new(),
    })
}

pub fn diagnose_normality(
    s: &Settings,
    update_index: usize,
    samples: usize,
) -> Result<Output, CliError> {
    let header = [
        "protocol",
        "W",
        "alpha",
        "b_thres",
        "update_index",
        "n_samples",
        "mean",
        "std",
        "model_sigma",
        "skewness",
        "excess_kurtosis",
        "ks_normal",
        "ks_uniform",
    ];
    let mut rows = Vec::new();
    for (protocol, params) in s.cells() {
        let cfg = sim_config(s, protocol, params);
        let r = normality_diagnostic(&cfg, update_index, samples)?;
        let model = match (update_index, protocol) {
            (0, _) => INITIAL_SIGMA,
            (k, Protocol::Desync) => sigma_desync(&params, k),
            (k, Protocol::Pco) => sigma_pco(&params, k),
        };
        rows.push(vec![
            protocol.to_string(),
            params.w.to_string(),
            num(params.alpha),
            num(params.b_thres),
            update_index.to_string(),
            r.n_samples.to_string(),
            num(r.mean),
            num(r.std),
            num(model),
            num(r.skewness),
            num(r.excess_kurtosis),
            num(r.ks_normal),
            num(r.ks_uniform),
        ]);
    }
    let mut doc = CsvDoc::default();
    doc.block(&header, rows);
    Ok(Output {
        text: doc.render(),
        warnings: Vec::new(),
    })
}
