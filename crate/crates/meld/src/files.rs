//! On-disk formats: meld sweep CSV, certificate, trace CSV, run summary.

use std::io::Write;
use std::path::Path;

use meld_core::meld::MeldCertificate;
use meld_core::sim::{fitted_decay_rate, SimTrace};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::pipeline::{Certification, Setup};

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// Shortest round-trip decimal form; exponent notation outside `[1e-4, 1e6)`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == 0.0 || (v.abs() >= 1e-4 && v.abs() < 1e6) || v.is_infinite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
}

pub fn meld_csv(certs: &[MeldCertificate]) -> Result<Vec<u8>, CliError> {
    let header: Vec<String> =
        ["sigma_bits", "degree_sum", "det_A", "cond_A", "is_meld", "reject_reason"].map(String::from).to_vec();
    csv_bytes(
        &header,
        certs.iter().map(|c| {
            vec![
                c.sigma.to_bit_string(),
                c.degree_sum.to_string(),
                num(c.det_a),
                num(c.cond_a),
                c.is_meld().to_string(),
                c.reject.map(|r| r.as_str().to_string()).unwrap_or_default(),
            ]
        }),
    )
}

/// Key–value certificate, read back by `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub name: String,
    pub epsilon: f64,
    pub alpha: f64,
    pub c: f64,
    pub l_theta: f64,
    pub l_psi: f64,
    pub n: f64,
    pub p: usize,
    pub tau0: f64,
    pub tau_bar: f64,
    pub s: f64,
    pub t: f64,
    pub initial_error: f64,
    /// Whether the schedule below respects `(τ0, τ̄, τ̄, …)`.
    pub certified: bool,
    pub schedule_starts: Vec<f64>,
    /// 1-based meld ids per interval.
    pub schedule_sequence: Vec<usize>,
    pub t_end: f64,
    pub deck: Vec<String>,
    pub deck_degrees: Vec<usize>,
    pub melds: Vec<String>,
    /// Operating point at which each meld was certified.
    pub meld_points: Vec<Vec<f64>>,
    pub gains: Vec<Vec<f64>>,
    pub seed: u64,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
    pub box_evaluations: usize,
    pub box_failures: usize,
    pub time_evaluations: usize,
    pub time_failures: usize,
}

impl CertificateFile {
    pub fn new(setup: &Setup, cert: &Certification) -> Self {
        let d = &cert.dwell;
        let e = &cert.estimation;
        Self {
            name: setup.cfg.name.clone(),
            epsilon: d.epsilon,
            alpha: d.alpha,
            c: d.c,
            l_theta: d.l_theta,
            l_psi: d.l_psi,
            n: d.n,
            p: d.p,
            tau0: d.tau0,
            tau_bar: d.tau_bar,
            s: d.s,
            t: d.t,
            initial_error: cert.initial_error,
            certified: cert.certified,
            schedule_starts: cert.schedule.starts.clone(),
            schedule_sequence: cert.schedule.melds.iter().map(|k| k + 1).collect(),
            t_end: cert.t_end,
            deck: setup.names.clone(),
            deck_degrees: setup.deck_degrees.clone(),
            melds: setup.melds.iter().map(|m| m.choice.to_bit_string()).collect(),
            meld_points: cert.melds.iter().map(|m| m.certificate.x0.clone()).collect(),
            gains: setup.gains.rows.clone(),
            seed: setup.cfg.seed,
            box_lower: setup.sampling_box.lower.clone(),
            box_upper: setup.sampling_box.upper.clone(),
            box_evaluations: e.box_evaluations,
            box_failures: e.box_failures,
            time_evaluations: e.time_evaluations,
            time_failures: e.time_failures,
        }
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("certificate serializes")
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Format { path: path.into(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }
}

pub fn trace_header(n: usize, m: usize, q: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=m).map(|i| format!("u{i}")));
    h.push("meld_id".into());
    for prefix in ["y", "yd", "err"] {
        h.extend((1..=q).map(|i| format!("{prefix}{i}")));
    }
    h.push("chi_err".into());
    h.push("bound_S".into());
    h
}

/// Trace CSV; `bound_S` is filled from `t0 + T` on and `nan` before.
pub fn trace_csv(trace: &SimTrace, s: f64, t_from: f64) -> Result<Vec<u8>, CliError> {
    let first = trace.rows.first().ok_or_else(|| CliError::Io(std::io::Error::other("empty trace")))?;
    let (n, m, q) = (first.x.len(), first.u.len(), first.y.len());
    csv_bytes(
        &trace_header(n, m, q),
        trace.rows.iter().map(|r| {
            let mut rec = Vec::with_capacity(4 + n + m + 3 * q);
            rec.push(num(r.t));
            rec.extend(r.x.iter().map(|v| num(*v)));
            rec.extend(r.u.iter().map(|v| num(*v)));
            rec.push((r.meld + 1).to_string());
            rec.extend(r.y.iter().map(|v| num(*v)));
            rec.extend(r.yd.iter().map(|v| num(*v)));
            rec.extend((0..q).map(|i| num(r.err(i))));
            rec.push(num(r.chi_err));
            rec.push(num(if r.t >= t_from - 1e-12 { s } else { f64::NAN }));
            rec
        }),
    )
}

/// Columns of a trace CSV, as read back by `verify`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceColumns {
    pub t: Vec<f64>,
    pub meld_id: Vec<usize>,
    pub y: Vec<Vec<f64>>,
    pub yd: Vec<Vec<f64>>,
    pub err: Vec<Vec<f64>>,
    pub chi_err: Vec<f64>,
}

impl TraceColumns {
    pub fn deck_len(&self) -> usize {
        self.y.len()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let name = path.display().to_string();
        let bad = |msg: String| CliError::Format { path: name.clone(), msg };
        let mut rd = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
        let header: Vec<String> = rd.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
        let col = |h: &str| header.iter().position(|c| c == h);
        let count = |prefix: &str| (1..).take_while(|i| col(&format!("{prefix}{i}")).is_some()).count();
        let q = count("y");
        if q == 0 || count("yd") != q || count("err") != q {
            return Err(bad("missing output columns".into()));
        }
        let need = |h: &str| col(h).ok_or_else(|| bad(format!("missing column {h}")));
        let (it, imeld, ichi) = (need("t")?, need("meld_id")?, need("chi_err")?);
        let idx = |p: &str| (1..=q).map(|i| col(&format!("{p}{i}")).unwrap()).collect::<Vec<_>>();
        let (iy, iyd, ie) = (idx("y"), idx("yd"), idx("err"));
        let mut out = TraceColumns { y: vec![vec![]; q], yd: vec![vec![]; q], err: vec![vec![]; q], ..Default::default() };
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let f = |k: usize| -> Result<f64, CliError> {
                rec.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("row {}: column {} is not a number", line + 2, header[k])))
            };
            out.t.push(f(it)?);
            out.meld_id.push(rec.get(imeld).and_then(|s| s.parse().ok()).ok_or_else(|| bad(format!("row {}: bad meld_id", line + 2)))?);
            for i in 0..q {
                out.y[i].push(f(iy[i])?);
                out.yd[i].push(f(iyd[i])?);
                out.err[i].push(f(ie[i])?);
            }
            out.chi_err.push(f(ichi)?);
        }
        if out.t.len() < 2 {
            return Err(bad("trace needs at least two rows".into()));
        }
        Ok(out)
    }
}

/// Per-interval decay rates and error levels of the in-meld outputs.
pub fn summary(setup: &Setup, cert: &Certification, trace: &SimTrace) -> String {
    let mut s = String::new();
    let push = |s: &mut String, line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    push(&mut s, format!("scenario {}", setup.cfg.name));
    push(
        &mut s,
        format!(
            "rows {}  dt {}  chi failures {}  switch warnings {}",
            trace.rows.len(),
            num(trace.dt),
            trace.chi_failures,
            trace.warnings.len()
        ),
    );
    for w in &trace.warnings {
        push(&mut s, format!("warning t={} meld {} -> {}: {:?}", num(w.t), w.from + 1, w.to + 1, w.issue));
    }
    push(&mut s, format!("alpha {}  schedule certified {}", num(cert.global.alpha), cert.certified));
    for k in 0..cert.schedule.intervals() {
        let rows = trace.interval(k);
        if rows.is_empty() {
            continue;
        }
        let id = cert.schedule.melds[k];
        let end = cert.schedule.starts.get(k + 1).copied().unwrap_or(cert.t_end);
        push(
            &mut s,
            format!("interval {k} [{}, {}) meld {} ({})", num(cert.schedule.starts[k]), num(end), id + 1, setup.melds[id].choice),
        );
        let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
        for &i in &setup.melds[id].outputs {
            let e: Vec<f64> = rows.iter().map(|r| r.err(i)).collect();
            let rate = fitted_decay_rate(&t, &e, 0.6).map(num).unwrap_or_else(|| "n/a".into());
            let max = e.iter().copied().fold(0.0, f64::max);
            push(
                &mut s,
                format!("  {:<4} decay {}  max err {}  final err {}", setup.names[i], rate, num(max), num(e[e.len() - 1])),
            );
        }
    }
    s
}
