//! Command dispatch. Every command returns its report as text.

use capnet::gaussian::{closed_form_cic3, closed_form_main4, GaussianBackend};
use capnet::info::{induced_joint, EncoderGrid, Evaluator, SearchCaps};
use capnet::model::{connectivity, validate_topology, Channel, IndexSet, NetworkTopology};
use capnet::ordering::{combined_status, FalsifierConfig, Status};
use capnet::plan::reduce;
use capnet::rates::{
    build_achievable_expression, build_outer_expression, capacity_report, default_scheme,
    eval_expression, eval_value, evaluate_conditions, maximize_expression, AnalysisOptions, Expr,
    SumRateExpression, SumRateResult, CAPACITY_TOL,
};
use capnet::selftest::{ck_identity_suite, psi_chain_suite};
use capnet::theorem::{AnalysisParams, SchemeId, TheoremId};
use serde_json::{json, Value};

use crate::config::{emit_network, parse_config, parse_network_str, Network};
use crate::output::{to_csv_string, to_json_string};
use crate::{Cli, CliError, Command, Format, GaussianModel, Options};

pub fn write_output(opts: &Options, text: &str) -> Result<(), CliError> {
    match &opts.out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {}", p.display(), e))),
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

fn json_out(v: Value) -> Result<String, CliError> {
    Ok(to_json_string(v))
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let opts = &cli.opts;
    if opts.format == Format::Csv && !matches!(cli.command, Command::Bound | Command::Achieve) {
        return Err(CliError::Config(
            "CSV output is available for bound and achieve".into(),
        ));
    }
    match cli.command {
        Command::Selftest => selftest(opts),
        Command::Validate => validate(opts),
        _ => {
            let path = opts
                .network
                .as_deref()
                .ok_or_else(|| CliError::Config("--network is required".into()))?;
            let net = reorder(parse_config(path)?, opts)?;
            let params = load_params(opts, &net.topology)?;
            match cli.command {
                Command::Reduce => reduce_cmd(&net),
                Command::Check => check(&net, opts, &params),
                Command::Bound => bound(&net, opts, &params),
                Command::Achieve => achieve(&net, opts, &params),
                Command::Capacity => capacity(&net, opts, &params),
                Command::Gaussian => gaussian(&net, opts, &params),
                Command::Validate | Command::Selftest => unreachable!(),
            }
        }
    }
}

/// Applies `--receiver-order`, given as 1-based receivers strongest first.
fn reorder(net: Network, opts: &Options) -> Result<Network, CliError> {
    let Some(order) = &opts.receiver_order else {
        return Ok(net);
    };
    let perm = order
        .split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(r) if r >= 1 => Ok(r - 1),
            _ => Err(CliError::Config(format!("bad receiver order `{}`", order))),
        })
        .collect::<Result<Vec<usize>, CliError>>()?;
    Ok(Network {
        topology: net.topology.permute_receivers(&perm)?,
        channel: net
            .channel
            .map(|c| c.permute_receivers(&perm))
            .transpose()?,
    })
}

fn load_params(opts: &Options, topology: &NetworkTopology) -> Result<AnalysisParams, CliError> {
    let Some(p) = &opts.params else {
        return Ok(AnalysisParams::defaults(topology.k2()));
    };
    let text = if p.trim_start().starts_with('{') {
        p.clone()
    } else {
        std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read params {}: {}", p, e)))?
    };
    let v: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("params: {}", e)))?;
    Ok(AnalysisParams::from_json(&v, topology)?)
}

fn theorem(opts: &Options) -> Result<TheoremId, CliError> {
    opts.theorem
        .as_deref()
        .ok_or_else(|| CliError::Config("--theorem is required".into()))?
        .parse()
        .map_err(CliError::from)
}

fn scheme(opts: &Options) -> Result<Option<SchemeId>, CliError> {
    opts.scheme
        .as_deref()
        .map(|s| s.parse().map_err(CliError::from))
        .transpose()
}

fn caps(opts: &Options) -> SearchCaps {
    let mut c = SearchCaps {
        grid: opts.grid,
        q_card: opts.q_card,
        message_card: opts.message_card,
        jobs: opts.jobs,
        ..SearchCaps::default()
    };
    if let Some(m) = opts.max_points {
        c.max_points = m;
    }
    c
}

fn falsifier(opts: &Options) -> FalsifierConfig {
    FalsifierConfig {
        seed: opts.seed,
        budget: opts.budget,
        u_cap: opts.u_cap,
        jobs: opts.jobs,
    }
}

fn analysis_options(opts: &Options) -> Result<AnalysisOptions, CliError> {
    if opts.grid == 0 || opts.q_card == 0 || opts.budget == 0 {
        return Err(CliError::Config(
            "--grid, --q-card and --budget must be positive".into(),
        ));
    }
    Ok(AnalysisOptions {
        caps: caps(opts),
        falsifier: falsifier(opts),
        tolerance: opts.tolerance.unwrap_or(CAPACITY_TOL),
    })
}

fn ids(t: &NetworkTopology, set: &IndexSet) -> Value {
    json!(t.message_ids(set))
}

fn one_based(set: &IndexSet) -> Value {
    json!(set.iter().map(|i| i + 1).collect::<Vec<_>>())
}

fn validate(opts: &Options) -> Result<String, CliError> {
    let path = opts
        .network
        .as_deref()
        .ok_or_else(|| CliError::Config("--network is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
    let net = reorder(parse_network_str(&text)?, opts)?;
    let t = &net.topology;
    let violations = validate_topology(t, net.channel.as_ref());
    let conn = match &net.channel {
        Some(c)
            if violations
                .iter()
                .all(|v| v.kind != capnet::model::ViolationKind::ChannelShape) =>
        {
            let r = connectivity(t, c)?;
            Value::Array(
                r.receivers
                    .iter()
                    .enumerate()
                    .map(|(j, rc)| {
                        json!({
                            "receiver": j + 1,
                            "connected_transmitters": one_based(&rc.connected_transmitters),
                            "unconnected_transmitters": one_based(&rc.unconnected_transmitters),
                            "connected_messages": ids(t, &rc.connected_messages),
                            "unconnected_messages": ids(t, &rc.unconnected_messages),
                        })
                    })
                    .collect(),
            )
        }
        _ => Value::Null,
    };
    json_out(json!({
        "ok": violations.is_empty(),
        "transmitters": t.k1(),
        "receivers": t.k2(),
        "messages": t.message_count(),
        "violations": to_value(&violations),
        "connectivity": conn,
        "network": emit_network(&net),
    }))
}

fn reduce_cmd(net: &Network) -> Result<String, CliError> {
    let t = &net.topology;
    let r = reduce(t);
    let per_receiver: Vec<Value> = (0..t.k2())
        .map(|j| {
            json!({
                "receiver": j + 1,
                "m_tilde": ids(t, &r.m_tilde_per_receiver[j]),
                "m_star": ids(t, &r.m_star_per_receiver[j]),
                "effective_demands": ids(t, &r.effective_demands[j]),
            })
        })
        .collect();
    let theta: serde_json::Map<String, Value> = r
        .theta
        .iter()
        .map(|(k, &v)| (k.clone(), json!(v + 1)))
        .collect();
    json_out(json!({
        "theta": theta,
        "m_tilde": ids(t, &r.m_tilde),
        "m_star": ids(t, &r.m_star),
        "per_receiver": per_receiver,
    }))
}

fn check(net: &Network, opts: &Options, params: &AnalysisParams) -> Result<String, CliError> {
    let th = theorem(opts)?;
    let ch = net.channel()?;
    let conn = connectivity(&net.topology, ch)?;
    let r = reduce(&net.topology);
    let (verdicts, used) =
        evaluate_conditions(&net.topology, ch, &conn, &r, th, params, &falsifier(opts))?;
    let status = combined_status(verdicts.iter().map(|v| &v.status));
    json_out(json!({
        "theorem": th,
        "status": status,
        "verdicts": to_value(&verdicts),
        "lambdas": lambdas_value(th, &used),
    }))
}

fn lambdas_value(th: TheoremId, p: &AnalysisParams) -> Value {
    if th != TheoremId::T7 {
        return Value::Null;
    }
    let m: serde_json::Map<String, Value> = p
        .lambdas
        .lambdas
        .iter()
        .map(|(j, l)| {
            (
                (j + 1).to_string(),
                json!(l.iter().map(|x| x + 1).collect::<Vec<_>>()),
            )
        })
        .collect();
    Value::Object(m)
}

fn rate_value(t: &NetworkTopology, e: &SumRateExpression, r: &SumRateResult) -> Value {
    json!({
        "expression": e.render(t),
        "value": r.value,
        "gaussian_restricted": r.gaussian_restricted,
        "argmax": to_value(&r.argmax),
        "argmax_count": r.argmax_count,
        "points": r.points,
        "active_branches": to_value(&r.breakdown.mins),
    })
}

/// One CSV row per grid point (discrete) or power scaling (Gaussian).
fn sweep(net: &Network, e: &SumRateExpression, opts: &Options) -> Result<String, CliError> {
    let t = &net.topology;
    match net.channel()? {
        Channel::Discrete(c) => {
            let caps = caps(opts);
            let grid = EncoderGrid::new(t, c, &caps, &e.nullified)?;
            let mut rows = Vec::new();
            for i in 0..grid.len() {
                let j = induced_joint(t, c, &grid.spec(i))?;
                rows.push(vec![
                    json!(i),
                    json!(eval_value(&e.root, &Evaluator::new(&j))?),
                ]);
            }
            to_csv_string(&["point", "value"], &rows).map_err(|e| CliError::Internal(e.to_string()))
        }
        Channel::Gaussian(g) => {
            let steps = opts.power_steps.max(1);
            let mut rows = Vec::new();
            for s in 0..=steps {
                let scale = s as f64 / steps as f64;
                let scaled = g.with_powers(g.powers().iter().map(|p| p * scale).collect())?;
                let be = GaussianBackend::new(t, &scaled)?;
                rows.push(vec![json!(scale), json!(eval_value(&e.root, &be)?)]);
            }
            to_csv_string(&["power_scale", "value"], &rows)
                .map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}

fn empty_sweep(net: &Network) -> Result<String, CliError> {
    let header: &[&str] = match net.channel()? {
        Channel::Discrete(_) => &["point", "value"],
        Channel::Gaussian(_) => &["power_scale", "value"],
    };
    to_csv_string(header, &[]).map_err(|e| CliError::Internal(e.to_string()))
}

fn bound(net: &Network, opts: &Options, params: &AnalysisParams) -> Result<String, CliError> {
    let th = theorem(opts)?;
    let ch = net.channel()?;
    let t = &net.topology;
    let aopts = analysis_options(opts)?;
    let conn = connectivity(t, ch)?;
    let r = reduce(t);
    let (verdicts, used) = evaluate_conditions(t, ch, &conn, &r, th, params, &aopts.falsifier)?;
    let status = combined_status(verdicts.iter().map(|v| &v.status));
    let expr = build_outer_expression(t, &r, th, &used)?;
    if opts.format == Format::Csv {
        // Bounds are only asserted under certified conditions.
        return if status == Status::Holds {
            sweep(net, &expr, opts)
        } else {
            empty_sweep(net)
        };
    }
    let outer = if status == Status::Holds {
        rate_value(t, &expr, &maximize_expression(t, ch, &expr, &aopts.caps)?)
    } else {
        Value::Null
    };
    json_out(json!({
        "theorem": th,
        "status": status,
        "verdicts": to_value(&verdicts),
        "expression": expr.render(t),
        "outer": outer,
        "tolerances": {"argmax": aopts.caps.argmax_tol, "violation_gap": capnet::ordering::GAP_TOL},
    }))
}

fn achieve(net: &Network, opts: &Options, params: &AnalysisParams) -> Result<String, CliError> {
    let ch = net.channel()?;
    let t = &net.topology;
    let aopts = analysis_options(opts)?;
    let sc = match scheme(opts)? {
        Some(s) => s,
        None => opts
            .theorem
            .as_ref()
            .map(|_| theorem(opts).map(default_scheme))
            .transpose()?
            .unwrap_or(SchemeId::Successive),
    };
    let conn = connectivity(t, ch)?;
    let expr = build_achievable_expression(t, &conn, &reduce(t), sc, params)?;
    if opts.format == Format::Csv {
        return sweep(net, &expr, opts);
    }
    let res = maximize_expression(t, ch, &expr, &aopts.caps)?;
    json_out(json!({
        "scheme": sc,
        "achievable": rate_value(t, &expr, &res),
        "tolerances": {"argmax": aopts.caps.argmax_tol},
    }))
}

fn capacity(net: &Network, opts: &Options, params: &AnalysisParams) -> Result<String, CliError> {
    let th = theorem(opts)?;
    let rep = capacity_report(
        &net.topology,
        net.channel()?,
        th,
        scheme(opts)?,
        params,
        &analysis_options(opts)?,
    )?;
    json_out(to_value(&rep))
}

fn gaussian(net: &Network, opts: &Options, params: &AnalysisParams) -> Result<String, CliError> {
    let Channel::Gaussian(g) = net.channel()? else {
        return Err(CliError::Config(
            "the gaussian command needs a Gaussian channel".into(),
        ));
    };
    match opts.model {
        GaussianModel::Main4 => json_out(to_value(&closed_form_main4(g)?)),
        GaussianModel::Cic3 => json_out(to_value(&closed_form_cic3(g)?)),
        GaussianModel::Generic => {
            let t = &net.topology;
            let r = reduce(t);
            let ch = net.channel()?;
            let conn = connectivity(t, ch)?;
            let (expr, conditions) = match &opts.theorem {
                Some(_) => {
                    let th = theorem(opts)?;
                    let (v, used) =
                        evaluate_conditions(t, ch, &conn, &r, th, params, &falsifier(opts))?;
                    (build_outer_expression(t, &r, th, &used)?, Some(v))
                }
                None => {
                    let sc = scheme(opts)?.unwrap_or(SchemeId::Successive);
                    (build_achievable_expression(t, &conn, &r, sc, params)?, None)
                }
            };
            let ev = eval_expression(&expr.root, &GaussianBackend::new(t, g)?)?;
            let (branches, active) = match (&expr.root, ev.mins.first()) {
                (Expr::Min(_), Some(m)) => (m.values.clone(), m.active),
                _ => (vec![ev.value], 0),
            };
            json_out(json!({
                "expression": expr.render(t),
                "conditions": conditions.map(|c| to_value(&c)),
                "branches": branches,
                "value": ev.value,
                "active_branch": active,
                "gaussian_restricted": true,
            }))
        }
    }
}

fn selftest(opts: &Options) -> Result<String, CliError> {
    let ck = ck_identity_suite(300, opts.seed)?;
    let ps = psi_chain_suite(10_000, opts.seed)?;
    let pass = ck.pass && ps.pass;
    let text = to_json_string(json!({"pass": pass, "suites": [to_value(&ck), to_value(&ps)]}));
    if pass {
        Ok(text)
    } else {
        write_output(opts, &text)?;
        Err(CliError::Internal("self test failed".into()))
    }
}
