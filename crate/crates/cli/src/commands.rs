use anyhow::{bail, Context, Result};
use num_bigint::BigUint;
use serde_json::Value;

use cannonball::equidist::{
    doubled_half_distances, erdos_turan_sweep, exp_sum_with, half_distance_histogram_with, sqrt_frac_points,
    weyl_profile,
};
use cannonball::exactseq::{collect_terms, exceptional_set, in_case_window, near_half_count_with};
use cannonball::minimax::{eliminate_chain, solve_exponents, ExponentSolution};
use cannonball::moments::{
    error_exponent, fit_residual_with, Average, MomentSummary, PowerSums, SandwichAccumulator, SANDWICH_BITS,
};
use cannonball::monomial::Monomial;
use cannonball::{Parallelism, RangeSpec};

use crate::checkpoint::{self, Outcome, Plan, Resumable, Saved};
use crate::emit::{self, int, real, text, Format, Table};
use crate::{Cli, Command, ResumeArgs, Sequence};

/// Decimal places printed for 128-bit fixed-point values.
const MAIN_DIGITS: usize = 30;
/// Decimal places printed for the 64-bit sandwich bounds.
const BOUND_DIGITS: usize = 18;

pub enum Status {
    Complete,
    Stopped(u64),
}

pub fn run(cli: &Cli) -> Result<Status> {
    let workers = match cli.workers {
        Some(w) => usize::try_from(w).context("--workers out of range")?,
        None => Parallelism::default().workers(),
    };
    let par = Parallelism::new(workers, cli.chunk)?;
    let default_format = if matches!(cli.command, Command::Optimize { .. }) { Format::Json } else { Format::Csv };
    let format = cli.format.unwrap_or(default_format);

    let table = match &cli.command {
        Command::Terms { range } => terms(*range, &par)?,
        Command::Moments { x, k, resume } => match moments(*x, k, resume, &par)? {
            Outcome::Done(t) => t,
            Outcome::Stopped { last_n } => return Ok(Status::Stopped(last_n)),
        },
        Command::Average { x, resume } => match average(*x, resume, &par)? {
            Outcome::Done(t) => t,
            Outcome::Stopped { last_n } => return Ok(Status::Stopped(last_n)),
        },
        Command::Sandwich { x, k, l, resume } => match sandwich(*x, *k, *l, resume, &par)? {
            Outcome::Done(t) => t,
            Outcome::Stopped { last_n } => return Ok(Status::Stopped(last_n)),
        },
        Command::Discrepancy { x, k_trunc, sequence, bits } => discrepancy(*x, k_trunc, *sequence, *bits, &par)?,
        Command::Weyl { x, m_max } => weyl(*x, *m_max, &par)?,
        Command::Knbound { range, m_max, bits } => knbound(*range, *m_max, *bits, &par)?,
        Command::Exceptional { x } => exceptional(*x, &par),
        Command::Nearhalf { x, bits } => nearhalf(*x, *bits, &par)?,
        Command::Histogram { x, bins } => histogram(*x, *bins, &par)?,
        Command::Optimize { exponent, var, terms, eliminate } => optimize(exponent, var, terms, eliminate)?,
        Command::Fit { xs, k } => fit(xs, *k, &par)?,
    };
    emit::write(&table, format, cli.out.as_deref())?;
    Ok(Status::Complete)
}

fn terms(range: (u64, u64), par: &Parallelism) -> Result<Table> {
    let spec = RangeSpec::new(range.0, range.1, par.chunk())?;
    let mut t = Table::new(&["n", "p", "f", "y", "a", "side"]);
    for term in collect_terms(spec, par) {
        t.push(vec![int(term.n), int(&term.p), int(&term.f), int(&term.y), int(&term.a), text(term.side.as_str())]);
    }
    Ok(t)
}

fn plan(command: &str, fingerprint: &str, resume: &ResumeArgs) -> Plan {
    let path = resume.checkpoint.clone().or_else(|| {
        resume.checkpoint_dir.as_ref().map(|d| d.join(format!("{command}-{}.json", &fingerprint[..16])))
    });
    Plan { path, every: resume.checkpoint_every, stop_after: resume.stop_after }
}

fn parse_big(s: &str) -> Result<BigUint> {
    s.parse::<BigUint>().with_context(|| format!("checkpoint value {s:?} is not a decimal integer"))
}

fn power_sums(command: &str, x: u64, ks: &[u32], resume: &ResumeArgs, par: &Parallelism) -> Result<Outcome<PowerSums>> {
    let init = PowerSums::new(ks)?;
    let k_list = ks.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
    let fp = checkpoint::fingerprint(command, &[("x", x.to_string()), ("k", k_list)]);
    let plan = plan(command, &fp, resume);
    let save = |p: &PowerSums| -> Saved {
        p.ks().iter().zip(p.sums()).map(|(k, s)| (format!("sum_k{k}"), s.to_string())).collect()
    };
    let load = |saved: &Saved| -> Result<PowerSums> {
        let sums = ks
            .iter()
            .map(|k| parse_big(checkpoint::field(saved, &format!("sum_k{k}"))?))
            .collect::<Result<Vec<_>>>()?;
        Ok(PowerSums::from_parts(ks, sums)?)
    };
    let job = Resumable { command, fingerprint: fp.clone(), x, init, save: &save, load: &load };
    checkpoint::run(job, &plan, |acc, lo, hi| {
        acc.merge(&PowerSums::compute(ks, lo, hi, par)?);
        Ok(())
    })
}

fn moments(x: u64, ks: &[u32], resume: &ResumeArgs, par: &Parallelism) -> Result<Outcome<Table>> {
    let sums = match power_sums("moments", x, ks, resume, par)? {
        Outcome::Done(s) => s,
        Outcome::Stopped { last_n } => return Ok(Outcome::Stopped { last_n }),
    };
    let mut t = Table::new(&["x", "k", "exact", "main", "residual", "normalized"]);
    for (&k, s) in sums.ks().iter().zip(sums.sums()) {
        let m = MomentSummary::new(x, k, s.clone());
        t.push(vec![
            int(x),
            int(k),
            int(&m.exact),
            text(m.main.to_decimal(MAIN_DIGITS)),
            text(m.residual.to_decimal(MAIN_DIGITS)),
            real(m.normalized),
        ]);
    }
    Ok(Outcome::Done(t))
}

fn average(x: u64, resume: &ResumeArgs, par: &Parallelism) -> Result<Outcome<Table>> {
    let sums = match power_sums("average", x, &[1], resume, par)? {
        Outcome::Done(s) => s,
        Outcome::Stopped { last_n } => return Ok(Outcome::Stopped { last_n }),
    };
    let m1 = sums.sums()[0].clone();
    let a = Average::new(x, m1.clone());
    let mut t = Table::new(&["x", "m1", "exact", "value", "main", "ratio"]);
    t.push(vec![
        int(x),
        int(&m1),
        text(a.exact.to_string()),
        text(a.value.to_decimal(MAIN_DIGITS)),
        text(a.main.to_decimal(MAIN_DIGITS)),
        real(a.ratio()),
    ]);
    Ok(Outcome::Done(t))
}

fn sandwich(x: u64, k: u32, l: u64, resume: &ResumeArgs, par: &Parallelism) -> Result<Outcome<Table>> {
    if l < 2 || !l.is_multiple_of(2) {
        bail!("--L must be an even integer ≥ 2, got {l}");
    }
    let init = SandwichAccumulator::new(k, l, SANDWICH_BITS)?;
    let fp = checkpoint::fingerprint(
        "sandwich",
        &[("x", x.to_string()), ("k", k.to_string()), ("L", l.to_string()), ("bits", SANDWICH_BITS.to_string())],
    );
    let plan = plan("sandwich", &fp, resume);
    let save = |a: &SandwichAccumulator| -> Saved {
        let (exact, lower, upper) = a.parts();
        let mut out = vec![("exact".to_string(), exact.to_string())];
        out.extend(lower.iter().enumerate().map(|(j, v)| (format!("lower_{}", j + 1), v.to_string())));
        out.extend(upper.iter().enumerate().map(|(j, v)| (format!("upper_{}", j + 1), v.to_string())));
        out
    };
    let load = |saved: &Saved| -> Result<SandwichAccumulator> {
        let bins = (l / 2) as usize;
        let get = |name: String| parse_big(checkpoint::field(saved, &name)?);
        let lower = (1..=bins).map(|j| get(format!("lower_{j}"))).collect::<Result<Vec<_>>>()?;
        let upper = (1..=bins).map(|j| get(format!("upper_{j}"))).collect::<Result<Vec<_>>>()?;
        Ok(SandwichAccumulator::from_parts(k, l, SANDWICH_BITS, get("exact".into())?, lower, upper)?)
    };
    let template = init.clone();
    let job = Resumable { command: "sandwich", fingerprint: fp.clone(), x, init, save: &save, load: &load };
    let out = checkpoint::run(job, &plan, |acc, lo, hi| {
        for part in par.map_chunks(lo, hi, |a, b| {
            let mut p = template.clone();
            p.add_range(a, b);
            p
        }) {
            acc.merge(&part);
        }
        Ok(())
    })?;
    let acc = match out {
        Outcome::Done(a) => a,
        Outcome::Stopped { last_n } => return Ok(Outcome::Stopped { last_n }),
    };
    let r = acc.finish(x);
    let mut t = Table::new(&["x", "k", "L", "lower", "exact", "upper", "certified", "gap_ratio", "bits"]);
    t.push(vec![
        int(x),
        int(k),
        int(l),
        text(r.lower.to_decimal(BOUND_DIGITS)),
        int(&r.exact),
        text(r.upper.to_decimal(BOUND_DIGITS)),
        Value::Bool(r.certified()),
        real(r.gap_ratio()),
        int(SANDWICH_BITS),
    ]);
    Ok(Outcome::Done(t))
}

fn discrepancy(x: u64, ks: &[u64], sequence: Sequence, bits: u32, par: &Parallelism) -> Result<Table> {
    let points = match sequence {
        Sequence::Frac => sqrt_frac_points(1, x, bits, par)?,
        Sequence::Half => doubled_half_distances(1, x, bits, par)?,
    };
    let name = match sequence {
        Sequence::Frac => "frac",
        Sequence::Half => "half",
    };
    let mut t = Table::new(&["n", "sequence", "bits", "d_unnormalized", "d_star", "K", "et_bound", "slack", "within_bound"]);
    let results = if ks.is_empty() { vec![points.star_discrepancy()?] } else { erdos_turan_sweep(&points, ks, par)? };
    for r in results {
        t.push(vec![
            int(r.n),
            text(name),
            int(bits),
            real(r.d_unnormalized),
            real(r.d_star),
            r.k.map_or(Value::Null, int),
            r.et_bound.map_or(Value::Null, real),
            real(r.slack),
            r.within_bound().map_or(Value::Null, Value::Bool),
        ]);
    }
    Ok(t)
}

fn weyl(x: u64, m_max: u64, par: &Parallelism) -> Result<Table> {
    let mut t = Table::new(&["n", "m", "ratio", "abs_error"]);
    for row in weyl_profile(x, m_max, par)? {
        t.push(vec![int(x), int(row.m), real(row.ratio), real(row.abs_error)]);
    }
    Ok(t)
}

fn knbound(range: (u64, u64), m_max: u64, bits: u32, par: &Parallelism) -> Result<Table> {
    let mut t = Table::new(&["lo", "hi", "m", "re", "im", "modulus", "abs_error", "kn_bound", "within_bound"]);
    for m in 1..=m_max {
        let m = i64::try_from(m).context("--m-max out of range")?;
        let s = exp_sum_with(range.0, range.1, m, bits, par)?;
        let within = s.kn_bound.map(|b| s.modulus() <= b + s.abs_error);
        t.push(vec![
            int(s.lo),
            int(s.hi),
            int(s.m),
            real(s.re),
            real(s.im),
            real(s.modulus()),
            real(s.abs_error),
            s.kn_bound.map_or(Value::Null, real),
            within.map_or(Value::Null, Value::Bool),
        ]);
    }
    Ok(t)
}

fn exceptional(x: u64, par: &Parallelism) -> Table {
    let mut t = Table::new(&["n", "in_case_window"]);
    for n in exceptional_set(x, par) {
        t.push(vec![int(n), Value::Bool(in_case_window(n))]);
    }
    t
}

fn nearhalf(x: u64, bits: u32, par: &Parallelism) -> Result<Table> {
    let r = near_half_count_with(x, bits, par)?;
    let mut t = Table::new(&["x", "bits", "count", "borderline"]);
    t.push(vec![int(x), int(bits), int(r.count), int(r.borderline)]);
    Ok(t)
}

fn histogram(x: u64, bins: usize, par: &Parallelism) -> Result<Table> {
    let h = half_distance_histogram_with(x, bins, par)?;
    let mut t = Table::new(&["bin", "lower", "upper", "count", "flagged", "frequency"]);
    let width = 0.5 / bins as f64;
    for (i, (&c, &f)) in h.counts.iter().zip(&h.flagged).enumerate() {
        t.push(vec![
            int(i + 1),
            real(i as f64 * width),
            real((i + 1) as f64 * width),
            int(c),
            int(f),
            real(c as f64 / x as f64),
        ]);
    }
    Ok(t)
}

fn solution_row(s: &ExponentSolution) -> Vec<Value> {
    let specs = |ms: &[Monomial]| Value::Array(ms.iter().map(|m| text(m.to_spec())).collect());
    vec![
        text(s.variable.clone()),
        s.argmin.as_ref().map_or(Value::Null, |m| text(m.to_spec())),
        specs(&s.value),
        specs(&s.crossings),
    ]
}

fn optimize(exponent: &Option<String>, var: &Option<String>, terms: &Option<String>, eliminate: &[String]) -> Result<Table> {
    let mut t = Table::new(&["variable", "argmin", "value", "crossings"]);
    if let Some(spec) = exponent {
        let var = var.as_deref().context("--var is required with --exponent")?;
        let (mut f, mut gs) = (None, Vec::new());
        for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, body) = part.split_once('=').with_context(|| format!("--exponent: expected F=... or G=..., got {part:?}"))?;
            let m = Monomial::parse(body).with_context(|| format!("--exponent: {part:?}"))?;
            match name.trim() {
                "F" if f.is_none() => f = Some(m),
                "F" => bail!("--exponent: only one F term is allowed"),
                n if n.starts_with('G') => gs.push(m),
                other => bail!("--exponent: unknown role {other:?}, expected F or G"),
            }
        }
        let f = f.context("--exponent: missing F term")?;
        t.push(solution_row(&solve_exponents(&f, &gs, var)?));
    } else if let Some(spec) = terms {
        let list = spec
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Monomial::parse(s).with_context(|| format!("--terms: {s:?}")))
            .collect::<Result<Vec<_>>>()?;
        let vars: Vec<&str> = eliminate.iter().map(String::as_str).collect();
        for step in eliminate_chain(&list, &vars)? {
            t.push(solution_row(&step.solution));
        }
    } else {
        bail!("optimize needs either --exponent with --var, or --terms with --eliminate");
    }
    Ok(t)
}

fn fit(xs: &[u64], k: u32, par: &Parallelism) -> Result<Table> {
    let r = fit_residual_with(xs, k, par)?;
    let mut t = Table::new(&["k", "xs", "slope", "intercept", "exponent"]);
    let list = r.xs.iter().map(u64::to_string).collect::<Vec<_>>().join(";");
    t.push(vec![int(k), text(list), real(r.slope), real(r.intercept), real(error_exponent(k))]);
    Ok(t)
}
