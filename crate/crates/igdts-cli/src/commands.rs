//! Atomic output helpers and the six command implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};

use igdts_core::imaging::{
    load_frame, load_sequence, parse_ground_truth, resize_to_patch, write_overlay, write_pgm,
};
use igdts_core::metrics::{summarize, Box2D};
use igdts_core::regression::{
    d_igdts, d_lad, d_lss, d_ols, igdts_fit, RegressionProblem, StepSize,
};
use igdts_core::slope::LambdaSequence;
use igdts_core::synth::{
    gen_regression, gen_sequence, MotionPreset, OutlierKind, SequenceConfig,
};
use igdts_core::tracker::Tracker;
use igdts_core::Error as CoreError;

use crate::config::{LostPolicy, RunConfig};

/// Writes through a temp file in the same directory and renames on success,
/// so failures never leave partial outputs behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", tmp.display()))?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create directory {}", path.display()))
}

// --- regress -----------------------------------------------------------------

/// Reads a `y,x1..xp` CSV into a regression design.
fn read_regression_csv(path: &Path) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| anyhow!(CoreError::Io { path: path.into(), source: e }))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().context("empty CSV")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first().map(|c| c.eq_ignore_ascii_case("y")) != Some(true) || cols.len() < 2 {
        bail!("{}: header must be y,x1,...,xp", path.display());
    }
    let p = cols.len() - 1;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}:{}: bad number", path.display(), lineno + 1))?;
        if fields.len() != p + 1 {
            bail!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                lineno + 1,
                p + 1,
                fields.len()
            );
        }
        ys.push(fields[0]);
        xs.extend_from_slice(&fields[1..]);
    }
    if ys.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let n = ys.len();
    let x = DMatrix::from_row_slice(n, p, &xs);
    Ok((x, DVector::from_vec(ys)))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_regress(
    input: &Path,
    lambda_max: f64,
    lambda_min_ratio: f64,
    eta: Option<f64>,
    eps: f64,
    max_iter: usize,
    out: &Path,
) -> Result<()> {
    let (x, y) = read_regression_csv(input)?;
    if lambda_max == 0.0 {
        log::warn!("lambda-max is 0: degenerate problem, the outlier vector absorbs the residual");
    }
    let lambda = LambdaSequence::linear_from_max(y.len(), lambda_max, lambda_min_ratio)
        .map_err(|e| anyhow!(e.to_string()))?;
    let mut problem = RegressionProblem::new(x, y, lambda)
        .map_err(|e| anyhow!(e.to_string()))?
        .with_tolerance(eps)
        .with_max_iter(max_iter);
    if let Some(e) = eta {
        problem = problem.with_step_size(StepSize::Fixed(e));
    }
    let sol = igdts_fit(&problem).map_err(|e| anyhow!(e.to_string()))?;

    let mut csv = String::from("kind,index,value\n");
    for (i, b) in sol.beta.iter().enumerate() {
        let _ = writeln!(csv, "beta,{i},{b}");
    }
    for (i, g) in sol.gamma.iter().enumerate() {
        let _ = writeln!(csv, "gamma,{i},{g}");
    }
    for (i, o) in sol.objective_trace.iter().enumerate() {
        let _ = writeln!(csv, "objective,{i},{o}");
    }
    for (i, m) in sol.mse_trace.iter().enumerate() {
        let _ = writeln!(csv, "mse,{},{m}", i + 1);
    }
    write_atomic(out, csv.as_bytes())?;
    println!(
        "iterations {} converged {} final_mse {}",
        sol.iterations,
        sol.converged,
        sol.mse_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

// --- distance-demo -----------------------------------------------------------

const DEMO_SIDE: usize = 32;

fn load_patch_checked(path: &Path, expect: &mut Option<(usize, usize)>) -> Result<DVector<f64>> {
    let frame = load_frame(path).map_err(|e| anyhow!(e.to_string()))?;
    let dims = (frame.width(), frame.height());
    match expect {
        Some(d) if *d != dims => bail!(
            "{}: image is {}x{} but earlier images were {}x{}",
            path.display(),
            dims.0,
            dims.1,
            d.0,
            d.1
        ),
        Some(_) => {}
        None => *expect = Some(dims),
    }
    Ok(DVector::from_vec(
        resize_to_patch(&frame, DEMO_SIDE).map_err(|e| anyhow!(e.to_string()))?,
    ))
}

pub fn cmd_distance_demo(
    template_dir: &Path,
    candidates: &[PathBuf],
    lambda_values: &[f64],
) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(template_dir)
        .with_context(|| format!("cannot read template directory {}", template_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("pgm" | "ppm" | "pnm" | "png" | "jpg" | "jpeg")
                )
        })
        .collect();
    entries.sort();
    if entries.len() < 2 {
        bail!(
            "need at least 2 template images in {}, found {}",
            template_dir.display(),
            entries.len()
        );
    }

    let mut dims = None;
    let templates: Vec<DVector<f64>> = entries
        .iter()
        .map(|p| load_patch_checked(p, &mut dims))
        .collect::<Result<_>>()?;
    let x = DMatrix::from_columns(&templates);

    let mut header = format!("{:<24} {:>12} {:>12}", "candidate", "d_OLS", "d_LAD");
    for lam in lambda_values {
        let _ = write!(header, " {:>12}", format!("d_LSS({lam})"));
    }
    for lam in lambda_values {
        let _ = write!(header, " {:>12}", format!("d_IGDTS({lam})"));
    }
    println!("{header}");

    let d = DEMO_SIDE * DEMO_SIDE;
    for path in candidates {
        let y = load_patch_checked(path, &mut dims)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let mut row = format!(
            "{:<24} {:>12.4} {:>12.4}",
            name,
            d_ols(&y, &x).map_err(|e| anyhow!(e.to_string()))?,
            d_lad(&y, &x).map_err(|e| anyhow!(e.to_string()))?,
        );
        for &lam in lambda_values {
            let v = d_lss(&y, &x, lam).map_err(|e| anyhow!(e.to_string()))?;
            let _ = write!(row, " {v:>12.4}");
        }
        for &lam in lambda_values {
            let lambda =
                LambdaSequence::linear_from_max(d, lam, 0.1).map_err(|e| anyhow!(e.to_string()))?;
            let v = d_igdts(&y, &x, &lambda).map_err(|e| anyhow!(e.to_string()))?;
            let _ = write!(row, " {v:>12.4}");
        }
        println!("{row}");
    }
    Ok(())
}

// --- track --------------------------------------------------------------------

pub fn cmd_track(
    seq_dir: &Path,
    pattern: &str,
    gt_path: &Path,
    cfg: RunConfig,
    out_dir: &Path,
    overlays: bool,
) -> Result<()> {
    let frames = load_sequence(seq_dir, pattern).map_err(|e| anyhow!(e.to_string()))?;
    let gt = parse_ground_truth(gt_path).map_err(|e| anyhow!(e.to_string()))?;
    if gt.len() < frames.len() {
        bail!(
            "ground truth ends at frame {} but the sequence has {} frames",
            gt.len(),
            frames.len()
        );
    }
    ensure_dir(out_dir)?;

    let (mut tracker, first) =
        Tracker::init_with_solver(&frames[0], &gt.boxes()[0], cfg.tracker, cfg.solver)
            .map_err(|e| anyhow!(e.to_string()))?;
    let mut results = vec![first];
    for frame in &frames[1..] {
        match tracker.step(frame) {
            Ok(r) => results.push(r),
            Err(CoreError::TrackingLost { frame: fi }) => match cfg.lost_policy {
                LostPolicy::Halt => bail!("tracking lost at frame {fi}"),
                LostPolicy::Coast => {
                    log::warn!("tracking lost at frame {fi}; coasting on the last state");
                    results.push(igdts_core::tracker::TrackResult {
                        frame_index: fi,
                        state: *tracker.last_state(),
                        bbox: tracker.last_bbox(),
                        distance: f64::INFINITY,
                        log_likelihood: f64::NEG_INFINITY,
                        updated_model: false,
                    });
                }
            },
            Err(e) => return Err(anyhow!(e.to_string())),
        }
    }

    let mut csv = String::from("frame,x,y,w,h,distance,log_likelihood,updated_model\n");
    for r in &results {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.frame_index,
            r.bbox.x,
            r.bbox.y,
            r.bbox.w,
            r.bbox.h,
            r.distance,
            r.log_likelihood,
            r.updated_model
        );
    }
    write_atomic(&out_dir.join("results.csv"), csv.as_bytes())?;

    let boxes: Vec<Box2D> = results.iter().map(|r| r.bbox).collect();
    let report = summarize(&boxes, gt.boxes()).map_err(|e| anyhow!(e.to_string()))?;
    write_atomic(&out_dir.join("report.csv"), report.report_csv().as_bytes())?;
    write_atomic(&out_dir.join("summary.csv"), report.summary_csv().as_bytes())?;

    if overlays {
        let overlay_dir = out_dir.join("overlays");
        ensure_dir(&overlay_dir)?;
        for (i, frame) in frames.iter().enumerate() {
            let path = overlay_dir.join(format!("{:04}.ppm", i + 1));
            let tmp = tmp_path(&path);
            write_overlay(
                frame,
                &[(boxes[i], [255, 32, 32]), (gt.boxes()[i], [32, 255, 32])],
                &tmp,
            )
            .map_err(|e| anyhow!(e.to_string()))?;
            fs::rename(&tmp, &path)
                .with_context(|| format!("cannot move {} into place", tmp.display()))?;
        }
    }

    print!("{}", report.summary_csv());
    Ok(())
}

// --- synth-regression ----------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_synth_regression(
    n: usize,
    p: usize,
    outlier_frac: f64,
    sigma_g: f64,
    sigma_l: f64,
    magnitude: Option<f64>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let kind = match magnitude {
        Some(m) => OutlierKind::FixedMagnitude(m),
        None => OutlierKind::Laplacian,
    };
    let data = gen_regression(n, p, outlier_frac, sigma_g, sigma_l, kind, seed)
        .map_err(|e| anyhow!(e.to_string()))?;

    let mut csv = String::from("y");
    for j in 1..=p {
        let _ = write!(csv, ",x{j}");
    }
    csv.push('\n');
    for i in 0..n {
        let _ = write!(csv, "{}", data.y[i]);
        for j in 0..p {
            let _ = write!(csv, ",{}", data.x[(i, j)]);
        }
        csv.push('\n');
    }
    write_atomic(out, csv.as_bytes())?;

    let mut truth = String::from("kind,index,value\n");
    for (j, b) in data.beta_true.iter().enumerate() {
        let _ = writeln!(truth, "beta,{j},{b}");
    }
    for &i in &data.outlier_idx {
        let _ = writeln!(truth, "outlier,{i},{}", data.gamma_true[i]);
    }
    let _ = writeln!(truth, "sigma_g,,{sigma_g}");
    let _ = writeln!(truth, "sigma_l,,{sigma_l}");
    let truth_path = sidecar_path(out);
    write_atomic(&truth_path, truth.as_bytes())?;
    println!(
        "wrote {} ({} rows) and {} ({} outliers)",
        out.display(),
        n,
        truth_path.display(),
        data.outlier_idx.len()
    );
    Ok(())
}

/// `data.csv` -> `data.truth.csv`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => out.with_extension(format!("truth.{ext}")),
        None => out.with_extension("truth"),
    }
}

// --- synth-sequence -------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_synth_sequence(
    n_frames: usize,
    frame_size: usize,
    target_size: usize,
    motion: MotionPreset,
    occlusion: Option<(usize, usize)>,
    coverage: f64,
    illumination_ramp: f64,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    let cfg = SequenceConfig {
        n_frames,
        frame_w: frame_size,
        frame_h: frame_size,
        target_size,
        motion,
        occlusion,
        occlusion_coverage: coverage,
        illumination_ramp,
        seed,
        ..SequenceConfig::default()
    };
    let seq = gen_sequence(&cfg).map_err(|e| anyhow!(e.to_string()))?;
    ensure_dir(out_dir)?;
    for (i, frame) in seq.frames.iter().enumerate() {
        let path = out_dir.join(format!("{:04}.pgm", i + 1));
        let tmp = tmp_path(&path);
        write_pgm(frame, &tmp).map_err(|e| anyhow!(e.to_string()))?;
        fs::rename(&tmp, &path)
            .with_context(|| format!("cannot move {} into place", tmp.display()))?;
    }
    let mut gt = String::new();
    for b in &seq.truth {
        let _ = writeln!(gt, "{},{},{},{}", b.x, b.y, b.w, b.h);
    }
    write_atomic(&out_dir.join("groundtruth.txt"), gt.as_bytes())?;
    println!(
        "wrote {} frames and groundtruth.txt to {}",
        seq.frames.len(),
        out_dir.display()
    );
    Ok(())
}

// --- eval -----------------------------------------------------------------------

/// Re-scores an existing results CSV (frame,x,y,w,h,...) against ground truth.
pub fn cmd_eval(results_path: &Path, gt_path: &Path, out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(results_path)
        .with_context(|| format!("cannot read {}", results_path.display()))?;
    let mut boxes = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 {
            bail!(
                "{}:{}: expected at least frame,x,y,w,h",
                results_path.display(),
                lineno + 1
            );
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].trim().parse().with_context(|| {
                format!("{}:{}: bad number `{}`", results_path.display(), lineno + 1, fields[i])
            })
        };
        boxes.push(Box2D::new(num(1)?, num(2)?, num(3)?, num(4)?));
    }
    let gt = parse_ground_truth(gt_path).map_err(|e| anyhow!(e.to_string()))?;
    let report = summarize(&boxes, gt.boxes()).map_err(|e| anyhow!(e.to_string()))?;
    ensure_dir(out_dir)?;
    write_atomic(&out_dir.join("report.csv"), report.report_csv().as_bytes())?;
    write_atomic(&out_dir.join("summary.csv"), report.summary_csv().as_bytes())?;
    print!("{}", report.summary_csv());
    Ok(())
}
