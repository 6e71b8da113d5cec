use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use specguard::attack::{attack_batch, pgd_attack, zipf_prompts, AttackConfig, AttackMode, AttackResult, ParetoPoint};
use specguard::experiments::{
    gen_labeled_traces, phase_transition_grid, run_with_clamp, synthetic_monitor_traces, validate_spectral,
    AdversarialSource, ClampProtocol, TraceGenConfig,
};
use specguard::guard::{
    ablate_threshold, compute_metrics, monitor_all, monitor_trace, read_labeled_jsonl, stratified_split,
    train_classifier, Decision, DetectionMetrics, GuardConfig, LabeledTrace, LogisticModel, TrainConfig,
};
use specguard::spectral::{extract_features, horizon_bound, near_critical_horizon, HorizonInputs, SpectralTrace};
use specguard::ssm::{random_tokens, RunOptions};
use specguard::{Error, Result};

use super::output::{Meta, Outputs};
use super::{
    AttackArgs, ClampArgs, Command, Context, EvalArgs, GenDataArgs, HorizonArgs, ModeArg, MonitorArgs, Outcome,
    ParetoArgs, PhaseArgs, SourceArg, SweepArg, TrainArgs, ValidateArgs,
};

pub fn dispatch(ctx: &Context, command: &Command) -> Result<Outcome> {
    let name = command_name(command);
    let meta = Meta::new(
        name,
        ctx.seed,
        &serde_json::json!({ "config": ctx.config, "command": command }),
    )?;
    let out = Outputs::new(&ctx.out, meta)?;
    match command {
        Command::InitModel => init_model(ctx, &out),
        Command::ValidateSpectral(a) => validate(ctx, &out, a),
        Command::Horizon(a) => horizon(&out, a),
        Command::Attack(a) => attack(ctx, &out, a),
        Command::Pareto(a) => pareto(ctx, &out, a),
        Command::Clamp(a) => clamp(ctx, &out, a),
        Command::Phase(a) => phase(ctx, &out, a),
        Command::GenData(a) => gen_data(ctx, &out, a),
        Command::TrainGuard(a) => train_guard(ctx, &out, a),
        Command::EvalGuard(a) => eval_guard(ctx, &out, a),
        Command::Monitor(a) => monitor(ctx, &out, a),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::InitModel => "init-model",
        Command::ValidateSpectral(_) => "validate-spectral",
        Command::Horizon(_) => "horizon",
        Command::Attack(_) => "attack",
        Command::Pareto(_) => "pareto",
        Command::Clamp(_) => "clamp",
        Command::Phase(_) => "phase",
        Command::GenData(_) => "gen-data",
        Command::TrainGuard(_) => "train-guard",
        Command::EvalGuard(_) => "eval-guard",
        Command::Monitor(_) => "monitor",
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn init_model(ctx: &Context, out: &Outputs) -> Result<Outcome> {
    let model = ctx.config.build_model()?;
    let path = out.path("model.json");
    model.save(&path)?;
    Ok(Outcome::new(format!(
        "init-model layers={} d_state={} d_model={} vocab={} -> {}",
        model.n_layers(),
        model.d_state(),
        model.d_model(),
        model.vocab_size(),
        path.display()
    )))
}

#[derive(Serialize)]
struct ValidateRow {
    index: usize,
    rho_exact: f64,
    rho_hat: f64,
    abs_error: f64,
}

fn validate(ctx: &Context, out: &Outputs, a: &ValidateArgs) -> Result<Outcome> {
    if a.n_matrices == 0 || a.k == 0 {
        return Err(usage("--n-matrices and --k must be >= 1"));
    }
    let model = ctx.config.build_model()?;
    let start = Instant::now();
    let v = validate_spectral(&model, a.n_matrices, a.k, ctx.seed)?;
    let elapsed = start.elapsed().as_secs_f64();
    let rows: Vec<ValidateRow> = v
        .rho_exact
        .iter()
        .zip(&v.rho_hat)
        .enumerate()
        .map(|(index, (&e, &h))| ValidateRow {
            index,
            rho_exact: e,
            rho_hat: h,
            abs_error: (e - h).abs(),
        })
        .collect();
    out.csv("validate_spectral.csv", &rows)?;
    let r = v.pearson.unwrap_or(f64::NAN);
    let mut o = Outcome::new(format!(
        "validate-spectral n={} k={} mae={:.3e} max_err={:.3e} r={:.8} time={:.2}s",
        v.n, v.k, v.mae, v.max_abs_error, r, elapsed
    ))
    .check("pearson r > 0.999999", r > 0.999999);
    o.hard.push(("MAE < 1e-5".into(), v.mae < 1e-5));
    Ok(o)
}

#[derive(Serialize)]
struct HorizonRow {
    rho: f64,
    h_eff: Option<f64>,
    near_critical: Option<f64>,
    status: String,
}

fn horizon(out: &Outputs, a: &HorizonArgs) -> Result<Outcome> {
    if a.rho.is_empty() {
        return Err(usage("--rho grid is empty"));
    }
    let mut rows = Vec::with_capacity(a.rho.len());
    for &rho in &a.rho {
        let inputs = HorizonInputs {
            rho,
            kappa: a.kappa,
            h0_norm: a.h0,
            epsilon: a.epsilon,
            lambda_max_wc: a.lambda_max,
        };
        let near = near_critical_horizon(1.0 - rho, a.kappa, a.epsilon).ok();
        rows.push(match horizon_bound(&inputs) {
            Ok(b) if b.vacuous => HorizonRow {
                rho,
                h_eff: Some(0.0),
                near_critical: near,
                status: "vacuous".into(),
            },
            Ok(b) => HorizonRow {
                rho,
                h_eff: Some(b.tokens),
                near_critical: near,
                status: "ok".into(),
            },
            Err(Error::BoundUndefined { .. }) => HorizonRow {
                rho,
                h_eff: None,
                near_critical: None,
                status: "bound undefined".into(),
            },
            Err(e) => return Err(usage(e.to_string())),
        });
    }
    out.csv("horizon.csv", &rows)?;
    let find = |r: f64| rows.iter().find(|x| x.rho == r).and_then(|x| x.h_eff);
    let mut o = Outcome::new(format!(
        "horizon rows={} {}",
        rows.len(),
        rows.iter()
            .map(|r| match r.h_eff {
                Some(h) => format!("rho={}:{:.1}", r.rho, h),
                None => format!("rho={}:{}", r.rho, r.status),
            })
            .collect::<Vec<_>>()
            .join(" ")
    ));
    if let (Some(h99), Some(h98)) = (find(0.99), find(0.98)) {
        let ratio = h99 / h98;
        o = o.check("H(0.99)/H(0.98) in [1.9, 2.1]", (1.9..=2.1).contains(&ratio));
    }
    Ok(o)
}

fn attack_config(
    ctx: &Context,
    mode: Option<ModeArg>,
    steps: Option<usize>,
    alpha: Option<f64>,
    lambda: Option<f64>,
) -> AttackConfig {
    let mut cfg = ctx.config.attack.clone();
    if let Some(m) = mode {
        cfg.mode = match m {
            ModeArg::SpectralOnly => AttackMode::SpectralOnly,
            ModeArg::JointLoss => AttackMode::JointLoss,
            ModeArg::RandomBaseline => AttackMode::RandomBaseline,
        };
    }
    cfg.steps = steps.unwrap_or(cfg.steps);
    cfg.alpha = alpha.unwrap_or(cfg.alpha);
    cfg.lambda = lambda.unwrap_or(cfg.lambda);
    cfg.seed = ctx.seed;
    cfg
}

fn attack(ctx: &Context, out: &Outputs, a: &AttackArgs) -> Result<Outcome> {
    let model = ctx.config.build_model()?;
    let cfg = attack_config(ctx, a.mode, a.steps, a.alpha, a.lambda);
    let prompts: Vec<Vec<usize>> = if !a.prompt.is_empty() {
        vec![a.prompt.clone()]
    } else {
        if a.n_prompts == 0 || a.prompt_len == 0 {
            return Err(usage("--n-prompts and --prompt-len must be >= 1"));
        }
        (0..a.n_prompts)
            .map(|i| random_tokens(model.vocab_size(), a.prompt_len, ctx.seed.wrapping_add(i as u64)))
            .collect()
    };
    let results: Vec<AttackResult> = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            pgd_attack(
                &model,
                p,
                &AttackConfig {
                    seed: cfg.seed.wrapping_add(i as u64),
                    ..cfg.clone()
                },
            )
        })
        .collect::<Result<_>>()?;
    out.jsonl("attack.jsonl", &results)?;
    let n = results.len() as f64;
    let decreased = results.iter().filter(|r| r.rho_mean_after < r.rho_mean_before).count();
    let mono: f64 = results
        .iter()
        .map(|r| {
            let steps = r.loss_curve.len().saturating_sub(1).max(1) as f64;
            r.loss_curve.windows(2).filter(|w| w[1] <= w[0]).count() as f64 / steps
        })
        .sum::<f64>()
        / n;
    let mean_delta = results.iter().map(|r| r.delta_rho_mean).sum::<f64>() / n;
    let mut o = Outcome::new(format!(
        "attack prompts={} decreased={} mean_delta_rho={:.3e} monotone_fraction={:.3}",
        results.len(),
        decreased,
        mean_delta,
        mono
    ));
    if cfg.mode == AttackMode::SpectralOnly && cfg.steps > 0 {
        o = o
            .check(
                "mean rho strictly decreases on >= 90% of prompts",
                decreased as f64 >= 0.9 * n,
            )
            .check("loss curve non-increasing on >= 80% of steps", mono >= 0.8);
    }
    Ok(o)
}

#[derive(Serialize)]
struct ParetoRow {
    lambda: f64,
    delta_rho_mean: f64,
    lexical_auc: f64,
    mode: AttackMode,
    kl_to_benign: f64,
}

fn pareto(ctx: &Context, out: &Outputs, a: &ParetoArgs) -> Result<Outcome> {
    if a.lambdas.len() < 2 {
        return Err(usage("--lambdas needs at least two values"));
    }
    if a.n_prompts == 0 || a.prompt_len == 0 {
        return Err(usage("--n-prompts and --prompt-len must be >= 1"));
    }
    let model = ctx.config.build_model()?;
    let prompts = zipf_prompts(a.n_prompts, a.prompt_len, model.vocab_size(), a.zipf, ctx.seed)?;
    let modes: &[AttackMode] = match a.mode {
        SweepArg::Both => &[AttackMode::JointLoss, AttackMode::RandomBaseline],
        SweepArg::JointLoss => &[AttackMode::JointLoss],
        SweepArg::RandomBaseline => &[AttackMode::RandomBaseline],
    };
    let mut points: Vec<ParetoPoint> = Vec::new();
    for &mode in modes {
        for &lambda in &a.lambdas {
            let mut cfg = attack_config(ctx, None, a.steps, None, Some(lambda));
            cfg.mode = mode;
            points.push(attack_batch(&model, &prompts, &cfg)?.0);
        }
    }
    let rows: Vec<ParetoRow> = points
        .iter()
        .map(|p| ParetoRow {
            lambda: p.lambda,
            delta_rho_mean: p.delta_rho_mean,
            lexical_auc: p.lexical_auc,
            mode: p.mode,
            kl_to_benign: p.kl_to_benign,
        })
        .collect();
    out.csv("pareto.csv", &rows)?;
    let stealthy_damage = points
        .iter()
        .filter(|p| p.mode == AttackMode::JointLoss)
        .any(|p| p.lexical_auc <= 0.60 && p.delta_rho_mean > 0.10);
    let baseline_ok = points
        .iter()
        .filter(|p| p.mode == AttackMode::RandomBaseline)
        .all(|p| p.delta_rho_mean < 0.05);
    let best = points
        .iter()
        .map(|p| p.delta_rho_mean)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome::new(format!(
        "pareto points={} prompts={} max_delta_rho={:.3e}",
        points.len(),
        prompts.len(),
        best
    ))
    .check(
        "no frontier point with lexical_auc <= 0.60 and delta_rho > 0.10",
        !stealthy_damage,
    )
    .check("random baseline delta_rho < 0.05", baseline_ok))
}

fn clamp(ctx: &Context, out: &Outputs, a: &ClampArgs) -> Result<Outcome> {
    if a.length == 0 {
        return Err(usage("--length must be >= 1"));
    }
    let model = ctx.config.build_model()?;
    let protocol = match a.layer {
        Some(l) => ClampProtocol::single_layer(l, a.rho_target),
        None => ClampProtocol::all_layer(a.rho_target),
    };
    protocol.validate(model.n_layers()).map_err(|e| usage(e.to_string()))?;
    let tokens = random_tokens(model.vocab_size(), a.length, ctx.seed);
    let opts = RunOptions {
        power_iters: ctx.config.guard.power_iters,
        ..RunOptions::default()
    };
    let (_, clamped) = run_with_clamp(&model, &tokens, &protocol, &opts)?;
    let (_, plain) = model.run_with(&tokens, &opts, None)?;
    out.jsonl("clamp_trace.jsonl", &clamped.records)?;
    let targeted_ok = clamped
        .records
        .iter()
        .filter(|r| protocol.targets(r.layer))
        .all(|r| r.rho_exact.unwrap_or(r.rho_hat) <= a.rho_target + 1e-12);
    let first_target = (0..model.n_layers()).find(|&l| protocol.targets(l)).unwrap_or(0);
    let upstream_ok = clamped
        .records
        .iter()
        .zip(&plain.records)
        .filter(|(r, _)| r.layer < first_target)
        .all(|(r, p)| r == p);
    let verdict = monitor_trace(&clamped, &ctx.config.guard);
    Ok(Outcome::new(format!(
        "clamp target={} layer={} tokens={} mean_rho={:.4} (unclamped {:.4}) monitor={:?}",
        a.rho_target,
        a.layer.map_or("all".to_string(), |l| l.to_string()),
        a.length,
        clamped.mean_rho(),
        plain.mean_rho(),
        verdict.decision
    ))
    .check("clamped layers have rho <= target", targeted_ok)
    .check("layers before the clamp match the unclamped run", upstream_ok))
}

#[derive(Serialize)]
struct PhaseRow {
    rho: f64,
    distance: usize,
    retention: f64,
    recoverable: bool,
}

#[derive(Serialize)]
struct HorizonCompareRow {
    rho: f64,
    empirical_horizon: usize,
    censored: bool,
    horizon_bound: f64,
}

fn phase(ctx: &Context, out: &Outputs, a: &PhaseArgs) -> Result<Outcome> {
    if a.rho_levels.is_empty() || a.distances.is_empty() {
        return Err(usage("--rho-levels and --distances must be non-empty"));
    }
    let model = ctx.config.build_model()?;
    let g = phase_transition_grid(&model, &a.rho_levels, &a.distances, a.epsilon, ctx.seed).map_err(|e| match e {
        Error::InvalidArgument(m) => usage(m),
        other => other,
    })?;
    let mut rows = Vec::new();
    for (i, &rho) in g.rho_levels.iter().enumerate() {
        for (j, &d) in g.distances.iter().enumerate() {
            rows.push(PhaseRow {
                rho,
                distance: d,
                retention: g.retention[i][j],
                recoverable: g.recoverable[i][j],
            });
        }
    }
    out.csv("phase.csv", &rows)?;
    let hz: Vec<HorizonCompareRow> = (0..g.rho_levels.len())
        .map(|i| HorizonCompareRow {
            rho: g.rho_levels[i],
            empirical_horizon: g.empirical_horizon[i],
            censored: g.censored[i],
            horizon_bound: g.horizon_bound[i],
        })
        .collect();
    out.csv("phase_horizons.csv", &hz)?;
    let recoverable = g.recoverable.iter().flatten().filter(|&&r| r).count();
    Ok(Outcome::new(format!(
        "phase cells={} recoverable={} monotone={} within_bound={}",
        rows.len(),
        recoverable,
        g.is_monotone(),
        g.within_bound()
    ))
    .check("recoverability monotone in rho and distance", g.is_monotone())
    .check("empirical horizon <= analytic bound", g.within_bound()))
}

fn gen_data(ctx: &Context, out: &Outputs, a: &GenDataArgs) -> Result<Outcome> {
    let model = ctx.config.build_model()?;
    let cfg = TraceGenConfig {
        length: a.length.unwrap_or(ctx.config.traces.length),
        seed: ctx.seed,
        ..ctx.config.traces.clone()
    };
    let traces = match a.source {
        SourceArg::Synthetic => synthetic_monitor_traces(
            a.adversarial,
            a.benign,
            model.n_layers(),
            cfg.length,
            ctx.config.guard.rho_min,
            ctx.seed,
        )?,
        SourceArg::Clamp => gen_labeled_traces(
            &model,
            a.benign,
            a.adversarial,
            &AdversarialSource::Clamp {
                rho_target: a.rho_target,
            },
            &cfg,
        )?,
        SourceArg::Pgd => gen_labeled_traces(
            &model,
            a.benign,
            a.adversarial,
            &AdversarialSource::Pgd {
                attack: AttackConfig {
                    seed: ctx.seed,
                    ..ctx.config.attack.clone()
                },
            },
            &cfg,
        )?,
    };
    let path = out.jsonl(&a.name, &traces)?;
    let benign_blocks = traces
        .iter()
        .filter(|t| !t.label && monitor_trace(&t.trace, &ctx.config.guard).is_block())
        .count();
    Ok(Outcome::new(format!(
        "gen-data traces={} benign={} adversarial={} benign_blocks={} -> {}",
        traces.len(),
        a.benign,
        a.adversarial,
        benign_blocks,
        path.display()
    ))
    .check("benign traces are never blocked", benign_blocks == 0))
}

fn load_traces(path: &Path) -> Result<Vec<LabeledTrace>> {
    let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    read_labeled_jsonl(BufReader::new(file)).map_err(|e| match e {
        Error::Schema { path: field, message } => Error::Schema {
            path: format!("{}: {field}", path.display()),
            message,
        },
        other => other,
    })
}

#[derive(Serialize)]
struct ScoreRow {
    stream_id: usize,
    label: bool,
    score: f64,
}

#[derive(Serialize)]
struct MetricsRow {
    tn: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    tp: u64,
    precision: f64,
    recall: f64,
    f1: f64,
    fpr: f64,
    auc: Option<f64>,
    precision_undefined: bool,
}

impl From<&DetectionMetrics> for MetricsRow {
    fn from(m: &DetectionMetrics) -> Self {
        Self {
            tn: m.tn,
            fp: m.fp,
            fn_: m.fn_,
            tp: m.tp,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            fpr: m.fpr,
            auc: m.auc,
            precision_undefined: m.precision_undefined,
        }
    }
}

fn metrics_line(m: &DetectionMetrics) -> String {
    let auc = m.auc.map_or("undefined".to_string(), |a| format!("{a:.3}"));
    format!(
        "precision={:.3} recall={:.3} F1={:.3} FPR={:.3} AUC={auc}",
        m.precision, m.recall, m.f1, m.fpr
    )
}

fn train_guard(ctx: &Context, out: &Outputs, a: &TrainArgs) -> Result<Outcome> {
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return Err(usage("--train-fraction must be in (0, 1)"));
    }
    let data = a.data.clone().unwrap_or_else(|| ctx.out.join("traces.jsonl"));
    let traces = load_traces(&data)?;
    let features = traces
        .iter()
        .map(|t| extract_features(&t.trace, a.gaps))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<bool> = traces.iter().map(|t| t.label).collect();
    let (train_idx, test_idx) = stratified_split(&labels, a.train_fraction, ctx.seed);
    let cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(ctx.config.train.epochs),
        learning_rate: a.learning_rate.unwrap_or(ctx.config.train.learning_rate),
        l2: a.l2.unwrap_or(ctx.config.train.l2),
        tau: a.tau.unwrap_or(ctx.config.train.tau),
        seed: ctx.seed,
    };
    let pick = |idx: &[usize]| -> (Vec<_>, Vec<bool>) {
        (
            idx.iter().map(|&i| features[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (xtr, ytr) = pick(&train_idx);
    let (model, report) = train_classifier(&xtr, &ytr, &cfg)?;
    out.json("guard_model.json", &model)?;
    let (xte, yte) = pick(&test_idx);
    let scores = xte.iter().map(|x| model.score(x)).collect::<Result<Vec<_>>>()?;
    let m = compute_metrics(&scores, &yte, model.tau)?;
    let rows: Vec<ScoreRow> = test_idx
        .iter()
        .zip(&scores)
        .map(|(&i, &s)| ScoreRow {
            stream_id: traces[i].stream_id,
            label: labels[i],
            score: s,
        })
        .collect();
    out.csv("heldout_scores.csv", &rows)?;
    out.csv("heldout_metrics.csv", &[MetricsRow::from(&m)])?;
    let final_loss = report.loss_curve.last().copied().unwrap_or(f64::NAN);
    Ok(Outcome::new(format!(
        "train-guard train={} test={} loss={final_loss:.4e} held-out {}",
        train_idx.len(),
        test_idx.len(),
        metrics_line(&m)
    ))
    .check("held-out AUC > 0.95", m.auc.is_some_and(|v| v > 0.95)))
}

#[derive(Deserialize)]
struct CountsFixture {
    tn: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    tp: u64,
}

#[derive(Serialize)]
struct AblationCsvRow {
    rho_min: f64,
    window: usize,
    precision: f64,
    recall: f64,
    f1: f64,
    fpr: f64,
}

fn eval_guard(ctx: &Context, out: &Outputs, a: &EvalArgs) -> Result<Outcome> {
    let counts = if let Some(p) = &a.counts_file {
        let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        let c: CountsFixture = serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
        Some((c.tn, c.fp, c.fn_, c.tp))
    } else if a.counts.len() == 4 {
        Some((a.counts[0], a.counts[1], a.counts[2], a.counts[3]))
    } else if a.counts.is_empty() {
        None
    } else {
        return Err(usage("--counts takes exactly four values tn,fp,fn,tp"));
    };
    if let Some((tn, fp, fn_, tp)) = counts {
        let m = DetectionMetrics::from_counts(tn, fp, fn_, tp);
        out.csv("metrics.csv", &[MetricsRow::from(&m)])?;
        return Ok(Outcome::new(format!("eval-guard counts {}", metrics_line(&m))));
    }
    let data = a
        .data
        .as_ref()
        .ok_or_else(|| usage("eval-guard needs --counts, --counts-file or --data"))?;
    let traces = load_traces(data)?;
    let labels: Vec<bool> = traces.iter().map(|t| t.label).collect();
    let mut o = Outcome::new(String::new());
    let mut parts = Vec::new();
    if let Some(mp) = &a.model {
        let text = std::fs::read_to_string(mp).map_err(|e| usage(format!("{}: {e}", mp.display())))?;
        let model = LogisticModel::from_json(&text).map_err(|e| Error::Schema {
            path: mp.display().to_string(),
            message: e.to_string(),
        })?;
        let gaps = model.layout.blocks.len() == 3;
        let scores = traces
            .iter()
            .map(|t| model.score(&extract_features(&t.trace, gaps)?))
            .collect::<Result<Vec<_>>>()?;
        let m = compute_metrics(&scores, &labels, a.tau.unwrap_or(model.tau))?;
        out.csv("metrics.csv", &[MetricsRow::from(&m)])?;
        parts.push(format!("classifier {}", metrics_line(&m)));
    }
    if !a.ablate.is_empty() {
        let rows = ablate_threshold(&traces, &a.ablate, &ctx.config.guard).map_err(|e| usage(e.to_string()))?;
        let csv_rows: Vec<AblationCsvRow> = rows
            .iter()
            .map(|r| AblationCsvRow {
                rho_min: r.rho_min,
                window: r.window,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
                fpr: r.fpr,
            })
            .collect();
        out.csv("ablation.csv", &csv_rows)?;
        let mut sorted = rows.clone();
        sorted.sort_by(|x, y| x.rho_min.total_cmp(&y.rho_min));
        let monotone = sorted.windows(2).all(|w| w[1].recall >= w[0].recall);
        o = o.check("recall non-decreasing in rho_min", monotone);
        if let Some(d) = rows.iter().find(|r| r.rho_min == GuardConfig::default().rho_min) {
            o = o.check("default row F1 = 1 and FPR = 0", d.f1 == 1.0 && d.fpr == 0.0);
            parts.push(format!(
                "ablation rows={} default F1={:.2} FPR={:.2}",
                rows.len(),
                d.f1,
                d.fpr
            ));
        } else {
            parts.push(format!("ablation rows={}", rows.len()));
        }
    }
    if parts.is_empty() {
        return Err(usage("eval-guard with --data needs --model or --ablate"));
    }
    o.summary = format!("eval-guard {}", parts.join("; "));
    Ok(o)
}

#[derive(Serialize)]
struct AlertRow {
    stream_id: usize,
    t: usize,
    window_min_rho: f64,
    decision: Decision,
}

fn read_monitor_input(path: &Path, n_layers: usize) -> Result<Vec<LabeledTrace>> {
    let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut first = None;
    for line in BufReader::new(file).lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with("{\"_meta\"") {
            continue;
        }
        first = Some(t.to_string());
        break;
    }
    let Some(first) = first else {
        return Ok(Vec::new());
    };
    let value: serde_json::Value = serde_json::from_str(&first).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if value.get("trace").is_some() {
        return load_traces(path);
    }
    let file = File::open(path)?;
    let trace = SpectralTrace::read_jsonl(BufReader::new(file), n_layers).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(vec![LabeledTrace {
        stream_id: 0,
        label: false,
        source: specguard::guard::TraceSource::Benign,
        injected_at: None,
        trace,
    }])
}

fn monitor(ctx: &Context, out: &Outputs, a: &MonitorArgs) -> Result<Outcome> {
    let guard = GuardConfig {
        rho_min: a.rho_min.unwrap_or(ctx.config.guard.rho_min),
        window: a.window.unwrap_or(ctx.config.guard.window),
        ..ctx.config.guard.clone()
    };
    guard.validate().map_err(|e| usage(e.to_string()))?;
    let n_layers = a.layers.unwrap_or(ctx.config.model.n_layers);
    let streams = read_monitor_input(&a.trace, n_layers)?;
    let mut alerts = Vec::new();
    let mut blocked_streams = 0;
    let mut benign_blocked = 0;
    let mut trigger_ok = true;
    for s in &streams {
        let verdicts = monitor_all(&s.trace, &guard);
        let first_block = verdicts.iter().position(|v| v.is_block());
        if first_block.is_some() {
            blocked_streams += 1;
            if !s.label {
                benign_blocked += 1;
            }
        }
        if let Some(inj) = s.injected_at {
            trigger_ok &= first_block.is_none_or(|b| b <= inj) && first_block.is_some();
        }
        for (t, v) in verdicts.iter().enumerate() {
            alerts.push(AlertRow {
                stream_id: s.stream_id,
                t,
                window_min_rho: v.window_min_rho,
                decision: v.decision,
            });
        }
    }
    out.jsonl("alerts.jsonl", &alerts)?;
    let blocks = alerts.iter().filter(|a| a.decision == Decision::Block).count();
    Ok(Outcome::new(format!(
        "monitor streams={} blocked_streams={} block_lines={} rho_min={} window={}",
        streams.len(),
        blocked_streams,
        blocks,
        guard.rho_min,
        guard.window
    ))
    .check("no benign stream blocked", benign_blocked == 0)
    .check("every injected collapse triggers at or before its token", trigger_ok))
}
