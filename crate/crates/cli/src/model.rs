use std::io::Write;
use std::path::Path;

use secmsg::benchmarks::{load_samples, mean_by_key};
use secmsg::models::{
    comm_multipair, compose_enhanced, eval_maxrate, fit_encdec_line, fit_hockney,
    fit_maxrate, overhead_multipair_slow, overhead_single_large, predict_multipair,
    predict_pipelined, predict_single, presets, validate as compare, Adjustment, ClassFit, ParamFile, Phase, Phased,
    SizeClass,
};
use secmsg::{EncDecLineParams, MaxRateParams, PhasedHockneyParams, PredictionReport};

use crate::args::{FitArgs, FitModel, ModelSource, PredictArgs, PredictMode, ValidateArgs, ValidateModel};
use crate::fail::{Failure, Outcome};

/// Parameters gathered from presets and an optional parameter file.
#[derive(Debug, Default)]
pub struct Sources {
    pub comm: Option<PhasedHockneyParams>,
    pub enc: Option<EncDecLineParams>,
    pub maxrate: Option<MaxRateParams>,
}

fn pin(p: PhasedHockneyParams, phase: Phase) -> PhasedHockneyParams {
    let h = *p.get(phase);
    Phased {
        eager: h,
        rendezvous: h,
        threshold: p.threshold,
    }
}

/// Presets win over the parameter file; the file fills whatever is left.
/// `multipair` maps the bare network names to their multiple-pair fits.
pub fn resolve(src: &ModelSource, multipair: bool) -> Outcome<Sources> {
    let mut s = Sources::default();
    if let Some(name) = &src.preset {
        let (base, phase) = if let Some(b) = name.strip_suffix("-eager") {
            (b, Some(Phase::Eager))
        } else if let Some(b) = name.strip_suffix("-rendezvous") {
            (b, Some(Phase::Rendezvous))
        } else {
            (name.as_str(), None)
        };
        let full = match base {
            "ethernet" | "ib" if multipair => format!("{base}-multipair"),
            _ => base.to_string(),
        };
        let p = presets::comm_by_name(&full).ok_or_else(|| {
            Failure::usage(format!(
                "unknown preset `{name}`; expected one of {} with optional -eager/-rendezvous",
                presets::COMM_NAMES.join(", ")
            ))
        })?;
        s.comm = Some(phase.map_or(p, |ph| pin(p, ph)));
    }
    if let Some(name) = &src.enc {
        let e = presets::enc_by_name(name).ok_or_else(|| {
            Failure::usage(format!(
                "unknown encryption preset `{name}`; expected one of {}",
                presets::ENC_NAMES.join(", ")
            ))
        })?;
        s.enc = Some(e);
        s.maxrate = presets::maxrate_by_name(name);
    }
    if let Some(path) = &src.params {
        let f = ParamFile::load(path)?;
        if s.comm.is_none() && f.hockney.is_some() {
            s.comm = Some(f.hockney()?);
        }
        if s.enc.is_none() && f.encdec.is_some() {
            s.enc = Some(f.encdec()?);
        }
        if s.maxrate.is_none() && f.maxrate.is_some() {
            s.maxrate = Some(f.maxrate()?);
        }
    }
    Ok(s)
}

fn need<'a, T>(x: &'a Option<T>, what: &str, hint: &str) -> Outcome<&'a T> {
    x.as_ref()
        .ok_or_else(|| Failure::runtime(format!("no {what} parameters: pass {hint} or a --params file with them")))
}

impl Sources {
    pub fn comm(&self) -> Outcome<&PhasedHockneyParams> {
        need(&self.comm, "communication", "--preset")
    }
    pub fn enc(&self) -> Outcome<&EncDecLineParams> {
        need(&self.enc, "encryption line", "--enc")
    }
    pub fn maxrate(&self) -> Outcome<&MaxRateParams> {
        need(&self.maxrate, "max-rate", "--enc boringssl")
    }

    /// Model latency in µs at (m, k) for `model`.
    pub fn latency(&self, model: ValidateModel, m: u64, k: u32) -> Outcome<f64> {
        Ok(match model {
            ValidateModel::Hockney => comm_multipair(self.comm()?, k, m).1,
            ValidateModel::Enhanced => predict_single(&compose_enhanced(self.comm()?, self.enc()?), m).micros,
            ValidateModel::Multipair => predict_multipair(self.comm()?, self.maxrate()?, k, m).micros,
            ValidateModel::Encdec => self.enc()?.eval(m),
            ValidateModel::Maxrate => eval_maxrate(self.maxrate()?, k, m),
        })
    }
}

fn adjustment_note(what: &str, a: Adjustment) {
    match a {
        Adjustment::None => {}
        Adjustment::OneByteAlpha => println!(
            "note: {what} intercept came out negative; alpha set to the mean 1-byte latency and beta refit"
        ),
        Adjustment::ZeroBeta => {
            println!("note: {what} slope came out negative; beta set to 0 and alpha to the mean latency")
        }
    }
}

fn class_row(c: SizeClass, f: &ClassFit<f64>) {
    println!(
        "{:<9} {:>12.4} {:>12.2} {:>12.2} {:>12.4e} {:>6}",
        c.to_string(),
        f.params.alpha_enc,
        f.params.a,
        f.params.b,
        f.sse,
        f.points
    );
}

pub fn fit(a: &FitArgs) -> Outcome {
    let samples = load_samples(&a.input)?;
    let mut file = match &a.out {
        Some(p) => ParamFile::load_or_default(p)?,
        None => ParamFile::default(),
    };
    match a.model {
        FitModel::Hockney => {
            let f = fit_hockney::<f64>(&samples, a.threshold)?;
            println!("{:<11} {:>14} {:>18}", "phase", "alpha_us", "beta_us_per_byte");
            for (ph, h) in [(Phase::Eager, f.params.eager), (Phase::Rendezvous, f.params.rendezvous)] {
                println!("{:<11} {:>14.4} {:>18.6e}", ph.to_string(), h.alpha, h.beta);
            }
            println!("threshold {} bytes", a.threshold);
            adjustment_note("eager", f.eager);
            adjustment_note("rendezvous", f.rendezvous);
            file.set_hockney(&f.params);
        }
        FitModel::Encdec => {
            let f = fit_encdec_line::<f64>(&samples)?;
            println!("{:>14} {:>18}", "alpha_enc_us", "beta_enc_us_per_byte");
            println!("{:>14.4} {:>18.6e}", f.params.alpha_enc, f.params.beta_enc);
            adjustment_note("encdec", f.adjustment);
            file.set_encdec(&f.params);
        }
        FitModel::Maxrate => {
            let f = fit_maxrate::<f64>(&samples)?;
            println!(
                "{:<9} {:>12} {:>12} {:>12} {:>12} {:>6}",
                "class", "alpha_enc_us", "A_B_per_us", "B_B_per_us", "sse", "points"
            );
            class_row(SizeClass::Small, &f.small);
            class_row(SizeClass::Moderate, &f.moderate);
            class_row(SizeClass::Large, &f.large);
            file.set_maxrate(&f.params);
        }
    }
    match &a.out {
        Some(p) => {
            file.save(p)?;
            println!("saved to {}", p.display());
        }
        None => println!("{}", file.to_json()),
    }
    Ok(())
}

fn mbps(bytes: u64, micros: f64) -> String {
    if bytes == 0 || micros <= 0.0 {
        "-".into()
    } else {
        format!("{:.2}", bytes as f64 / micros)
    }
}

fn pairs_or_one(p: &[u32]) -> Outcome<Vec<u32>> {
    if p.contains(&0) {
        return Err(Failure::usage("--pairs must be at least 1"));
    }
    Ok(if p.is_empty() { vec![1] } else { p.to_vec() })
}

pub fn predict(a: &PredictArgs) -> Outcome {
    let s = resolve(&a.source, a.mode == PredictMode::Multipair)?;
    match a.mode {
        PredictMode::Single => {
            let comm = s.comm()?;
            let label = if s.enc.is_some() { "latency_us(enc)" } else { "latency_us" };
            println!("{:>10} {:<11} {:>16} {:>12}", "size_B", "phase", label, "MB/s");
            for &m in &a.sizes {
                let p = match &s.enc {
                    Some(e) => predict_single(&compose_enhanced(comm, e), m),
                    None => predict_single(comm, m),
                };
                let ph = p.phase.map_or("-".into(), |x| x.to_string());
                println!("{:>10} {:<11} {:>16.3} {:>12}", m, ph, p.micros, mbps(m, p.micros));
            }
        }
        PredictMode::Multipair => {
            let (comm, mr) = (s.comm()?, s.maxrate()?);
            println!(
                "{:>10} {:>5} {:<11} {:<9} {:>12} {:>12} {:>14} {:>12}",
                "size_B", "pairs", "phase", "class", "t_comm_us", "t_enc_us", "latency_us", "agg_MB/s"
            );
            for k in pairs_or_one(&a.pairs)? {
                for &m in &a.sizes {
                    let p = predict_multipair(comm, mr, k, m);
                    println!(
                        "{:>10} {:>5} {:<11} {:<9} {:>12.3} {:>12.3} {:>14.3} {:>12}",
                        m,
                        k,
                        p.phase.to_string(),
                        p.class.to_string(),
                        p.t_comm,
                        p.t_enc,
                        p.micros,
                        mbps(m * u64::from(k), p.micros)
                    );
                }
            }
        }
        PredictMode::Pipelined => {
            let (comm, enc) = (s.comm()?, s.enc()?);
            println!(
                "{:>10} {:<11} {:>12} {:>12} {:>14} {:>10}",
                "size_B", "phase", "t_comm_us", "t_enc_us", "latency_us", "overhead"
            );
            for &m in &a.sizes {
                let p = predict_pipelined(comm, enc, m);
                println!(
                    "{:>10} {:<11} {:>12.3} {:>12.3} {:>14.3} {:>9.1}%",
                    m,
                    p.phase.to_string(),
                    p.t_comm,
                    p.t_enc,
                    p.micros,
                    100.0 * p.overhead()
                );
            }
        }
        PredictMode::Overhead => {
            let (comm, enc) = (s.comm()?, s.enc()?);
            let h = comm.get(Phase::Rendezvous);
            let r = overhead_single_large(enc, h)?;
            println!(
                "single-pair large-message overhead: {:.0}% (beta_enc {:.4e} / beta_comm {:.4e})",
                100.0 * r,
                enc.beta_enc,
                h.beta
            );
            if let (Some(mr), false) = (&s.maxrate, a.pairs.is_empty()) {
                println!("{:>10} {:>5} {:<11} {:<9} {:>10}  regime", "size_B", "pairs", "phase", "class", "overhead");
                for k in pairs_or_one(&a.pairs)? {
                    for &m in &a.sizes {
                        let t = overhead_multipair_slow(comm, mr, k, m)?;
                        println!(
                            "{:>10} {:>5} {:<11} {:<9} {:>9.2}%  {}",
                            m,
                            k,
                            t.phase.to_string(),
                            t.class.to_string(),
                            100.0 * t.ratio,
                            if t.in_regime { "holds" } else { "violated: encryption dominates" }
                        );
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn write_report(w: impl Write, r: &PredictionReport) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "size_bytes,k_pairs,measured_us,predicted_us,rel_error")?;
    for row in &r.rows {
        writeln!(w, "{},{},{},{},{}", row.size, row.k, row.measured, row.predicted, row.rel_error)?;
    }
    w.flush()
}

fn save_report(path: &Path, r: &PredictionReport) -> Outcome {
    write_report(std::fs::File::create(path)?, r)?;
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> Outcome {
    let samples = load_samples(&a.input)?;
    let s = resolve(&a.source, a.model == ValidateModel::Multipair)?;
    let measured = mean_by_key(&samples);
    let predicted = measured
        .iter()
        .map(|&((m, k), _)| Ok(((m, k), s.latency(a.model, m, k)?)))
        .collect::<Outcome<Vec<_>>>()?;
    let r = compare(&measured, &predicted);
    println!(
        "{:>10} {:>5} {:>14} {:>14} {:>9}",
        "size_B", "k", "measured_us", "predicted_us", "error"
    );
    for row in &r.rows {
        println!(
            "{:>10} {:>5} {:>14.3} {:>14.3} {:>8.2}%",
            row.size,
            row.k,
            row.measured,
            row.predicted,
            100.0 * row.rel_error
        );
    }
    println!("per-size mean relative error:");
    for p in &r.per_size {
        println!("{:>10} {:>8.2}% over {} key(s)", p.size, 100.0 * p.mape, p.keys);
    }
    if let Some(m) = r.mape() {
        println!("overall {:.2}%", 100.0 * m);
    }
    for (m, k) in &r.missing_predictions {
        eprintln!("warning: no prediction for size {m}, k {k}");
    }
    for (m, k) in &r.missing_measurements {
        eprintln!("warning: no measurement for size {m}, k {k}");
    }
    if let Some(out) = &a.out {
        save_report(out, &r)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}
