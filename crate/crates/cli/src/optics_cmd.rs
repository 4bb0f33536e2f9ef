use std::fs::{self, File};
use std::io::{BufWriter, Write};

use adalidar::optics::{self, format_sig9, write_sweep_csv, OpticsError};
use adalidar::scan::{budget, fit_budget as fit, ScanError};
use adalidar::{MirrorModel, ReceiverKind, ReceiverSpec, TransmitterSpec};
use anyhow::Context;

use crate::args::{DesignSel, FitBudgetArgs, OpticsSweepArgs};
use crate::parse::{budget_pair, range_grid, usage};

const MM: f64 = 1e-3;

fn kinds(sel: DesignSel) -> Vec<ReceiverKind> {
    match sel {
        DesignSel::All => ReceiverKind::ALL.to_vec(),
        DesignSel::Retro => vec![ReceiverKind::Retroreflective],
        DesignSel::Array => vec![ReceiverKind::ReceiverArray],
        DesignSel::Single => vec![ReceiverKind::SingleDetector],
    }
}

/// Parameter problems are the caller's fault.
fn flag_error(e: OpticsError) -> anyhow::Error {
    usage(e.to_string())
}

pub fn optics_sweep(a: &OpticsSweepArgs) -> anyhow::Result<()> {
    let ranges = range_grid(&a.z_m)?;
    for (name, len) in [
        ("--M", a.m.len()),
        ("--w0-mm", a.w0_mm.len()),
        ("--Z-m", ranges.len()),
        ("--A-mm", a.a_mm.len()),
        ("--u-mm", a.u_mm.len()),
        ("--f-mm", a.f_mm.len()),
    ] {
        if len == 0 {
            return Err(usage(format!("{name} grid is empty")));
        }
    }
    let fov = a.mirror_fov_deg.to_radians();
    let mut tx = Vec::new();
    for &m in &a.m {
        for &w0 in &a.w0_mm {
            tx.push(TransmitterSpec::new(m, w0 * MM, a.lambda_m, fov).map_err(flag_error)?);
        }
    }
    let mut rx = Vec::new();
    for kind in kinds(a.design) {
        for &ap in &a.a_mm {
            for &u in &a.u_mm {
                for &f in &a.f_mm {
                    rx.push(ReceiverSpec::new(kind, a.n, ap * MM, u * MM, f * MM).map_err(flag_error)?);
                }
            }
        }
    }
    let rows = optics::sweep(&tx, &rx, &ranges).map_err(flag_error)?;

    let path = a.out.join("sweep.csv");
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    println!("{} rows -> {}", rows.len(), path.display());

    if a.crossovers {
        let records = optics::received_radiance_crossovers(&rows, ranges.len());
        let path = a.out.join("crossovers.csv");
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "M,w0_m,kind_a,rx_a,kind_b,rx_b,Z_star_m")?;
        let mut found = 0;
        for r in &records {
            let t = &tx[r.tx_index];
            let head = format!(
                "{},{},{},{},{},{}",
                format_sig9(t.beam_quality()),
                format_sig9(t.waist_radius()),
                r.kind_a,
                r.rx_a,
                r.kind_b,
                r.rx_b
            );
            if r.ranges.is_empty() {
                writeln!(w, "{head},")?;
            }
            for z in &r.ranges {
                writeln!(w, "{head},{}", format_sig9(*z))?;
                found += 1;
            }
        }
        w.flush()?;
        println!("{found} crossovers over {} design pairs -> {}", records.len(), path.display());
    }
    Ok(())
}

pub fn fit_budget(a: &FitBudgetArgs) -> anyhow::Result<()> {
    let pairs = a.pairs.iter().map(|p| budget_pair(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let bad = |e: ScanError| usage(e.to_string());
    let fitted = fit(&pairs).map_err(bad)?;
    let model = MirrorModel {
        sample_rate: fitted.sample_rate,
        frame_overhead: fitted.frame_overhead,
        ..MirrorModel::default()
    };
    let path = a.out.join("budget_fit.json");
    let text = serde_json::to_string_pretty(&fitted)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;

    let path = a.out.join("budget_table.csv");
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "fps,observed_samples,predicted_samples,relative_error")?;
    for &(fps, observed) in &pairs {
        let predicted = budget(&model, fps).map_err(bad)?;
        writeln!(w, "{fps},{observed},{predicted},{:.6}", (predicted as f64 - observed) / observed)?;
    }
    w.flush()?;
    println!(
        "sample_rate_hz={:.4} frame_overhead_s={:.6} residual_rms={:.4}",
        fitted.sample_rate, fitted.frame_overhead, fitted.residual_rms
    );
    Ok(())
}
