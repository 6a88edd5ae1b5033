//! Subcommand implementations. Each returns `Ok` on success; the binary maps
//! errors to exit codes through [`CliError::exit_code`].

use std::io::Write;
use std::path::Path;

use tanhpolar::metrics::{self, ConfusionMatrix};
use tanhpolar::warp;
use tanhpolar::{BBox, Tensor};

use crate::check;
use crate::classes;
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::formats::grid::{self, DumpDirection, GridDump};
use crate::formats::report::EvalReport;
use crate::formats::{png, raw};

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Warps a PNG image onto the configured Tanh-polar raster and writes it as
/// PNG, or as a raw tensor for any other output extension. With `classes`
/// the input is read as a class-index mask and its one-hot encoding is
/// warped and written as a raw tensor.
pub fn cmd_warp(input: &Path, bbox: &BBox, output: &Path, cfg: &Config, classes: Option<usize>) -> Result<()> {
    let src = match classes {
        Some(c) => png::read_mask(input, c)?.one_hot(),
        None => png::read_image(input)?,
    };
    let polar = warp::warp_image_with(&src, bbox, cfg.height, cfg.width, cfg.border)?;
    if classes.is_none() && is_png(output) {
        png::write_image(output, &polar)
    } else {
        raw::write_tensor(output, &polar)
    }
}

/// Reads Tanh-polar scores from a raw tensor or PNG file.
pub fn read_scores(path: &Path) -> Result<(Tensor, bool)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    if raw::is_raw_tensor(&bytes) {
        Ok((raw::RawTensor::decode(&bytes, path)?.into_tensor()?, false))
    } else {
        Ok((png::read_image(path)?, true))
    }
}

/// Maps Tanh-polar scores back to an `orig_h x orig_w` image.
///
/// A `.png` output receives the per-pixel argmax as a class-index mask
/// when the input is a multi-channel raw tensor, and the resampled image
/// otherwise. Any other extension receives the resampled scores as a raw
/// tensor. `overlay` additionally writes the argmax mask in palette colors.
pub fn cmd_unwarp(
    input: &Path,
    bbox: &BBox,
    orig: (usize, usize),
    output: &Path,
    cfg: &Config,
    overlay: Option<&Path>,
) -> Result<()> {
    let (scores, from_png) = read_scores(input)?;
    let [bn, cn, h, w] = scores.shape();
    if bn != 1 || (h, w) != (cfg.height, cfg.width) {
        return Err(CliError::Shape(format!(
            "{}: scores {bn}x{cn}x{h}x{w}, expected 1xCx{}x{}",
            input.display(),
            cfg.height,
            cfg.width
        )));
    }
    let cart = warp::unwarp_scores(&scores, bbox, orig.0, orig.1)?;
    let labels = (!from_png && cn >= 2).then(|| warp::argmax_channels(&cart)).transpose()?;
    if is_png(output) {
        match &labels {
            Some(mask) => png::write_mask(output, mask)?,
            None => png::write_image(output, &cart)?,
        }
    } else {
        raw::write_tensor(output, &cart)?;
    }
    if let Some(path) = overlay {
        let mask = labels.ok_or_else(|| {
            CliError::Usage("--overlay needs multi-channel raw scores as input".into())
        })?;
        png::write_overlay(path, &mask, &cfg.palette)?;
    }
    Ok(())
}

/// Builds a grid of the requested direction and writes it.
///
/// `forward` samples the Cartesian image onto the `h x w` polar raster;
/// `inverse` samples the `h x w` polar raster onto an `orig` image;
/// `tp2tc` / `tc2tp` are the bbox-free `h x w` inter-grid maps.
pub fn make_grid(
    direction: DumpDirection,
    bbox: Option<&BBox>,
    h: usize,
    w: usize,
    orig: Option<(usize, usize)>,
) -> Result<GridDump> {
    let need_bbox = || bbox.ok_or_else(|| CliError::Usage(format!("{direction:?} grid needs --bbox")));
    let g = match direction {
        DumpDirection::Forward => warp::make_forward_grid(need_bbox()?, h, w)?,
        DumpDirection::Inverse => {
            let (oh, ow) = orig.ok_or_else(|| CliError::Usage("inverse grid needs --orig HxW".into()))?;
            warp::make_inverse_grid(need_bbox()?, oh, ow, h, w)?
        }
        DumpDirection::Tp2Tc => warp::make_tp_to_tc_grid(h, w)?,
        DumpDirection::Tc2Tp => warp::make_tc_to_tp_grid(h, w)?,
    };
    Ok(GridDump::from_grid(&g, direction))
}

pub fn cmd_griddump(
    direction: DumpDirection,
    bbox: Option<&BBox>,
    cfg: &Config,
    orig: Option<(usize, usize)>,
    output: &Path,
) -> Result<()> {
    grid::write_grid(output, &make_grid(direction, bbox, cfg.height, cfg.width, orig)?)
}

/// Runs a suite, printing the table to `out`.
pub fn cmd_check(suite: &str, out: &mut impl Write) -> Result<()> {
    let checks = check::select(suite)?;
    let results = check::run(&checks, out).map_err(|e| CliError::io("<stdout>", e))?;
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed {
            failed,
            total: results.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions<'a> {
    pub classes: usize,
    /// `face11` or a comma-separated list; `class<i>` names when absent.
    pub names: Option<&'a str>,
    /// See [`classes::parse_groups`].
    pub groups: Option<&'a str>,
    pub include_background: bool,
}

/// Scores prediction masks against ground truth, pairing files by position,
/// and accumulates one confusion matrix over all pairs.
pub fn cmd_eval(preds: &[impl AsRef<Path>], gts: &[impl AsRef<Path>], opts: &EvalOptions) -> Result<EvalReport> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(CliError::Usage(format!(
            "need matching non-empty --pred / --gt lists, got {} and {}",
            preds.len(),
            gts.len()
        )));
    }
    let class_names = classes::parse_names(opts.names, opts.classes).map_err(CliError::Usage)?;
    let groups = opts
        .groups
        .map(|g| classes::parse_groups(g, opts.classes))
        .transpose()
        .map_err(CliError::Usage)?;
    let mut cm = ConfusionMatrix::new(opts.classes);
    for (p, g) in preds.iter().zip(gts) {
        let (p, g) = (p.as_ref(), g.as_ref());
        let (pred, gt) = (png::read_mask(p, opts.classes)?, png::read_mask(g, opts.classes)?);
        if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
            return Err(CliError::Shape(format!(
                "{} is {}x{} but {} is {}x{}",
                p.display(),
                pred.height(),
                pred.width(),
                g.display(),
                gt.height(),
                gt.width()
            )));
        }
        cm.accumulate(&pred, &gt)?;
    }
    let group_scores = match groups {
        Some((names, groups)) => names.into_iter().zip(metrics::merge_regions(&cm, &groups)?).collect(),
        None => Vec::new(),
    };
    Ok(EvalReport {
        images: preds.len(),
        pixels: cm.total(),
        class_names,
        scores: metrics::iou_f1_with(&cm, opts.include_background),
        groups: group_scores,
    })
}

/// `count` augmented boxes for draw indices `0..count`.
pub fn cmd_augbox(bbox: &BBox, count: u64, cfg: &Config) -> Result<Vec<BBox>> {
    (0..count)
        .map(|k| Ok(warp::augment_bbox(bbox, &cfg.augment, k)?))
        .collect()
}

/// Cross-entropy, Dice and their `lambda` mix for a probability tensor
/// against a mask.
pub fn cmd_loss(probs: &Path, gt: &Path, cfg: &Config) -> Result<(f64, f64, f64, usize)> {
    let p = raw::read_tensor(probs)?;
    let mask = png::read_mask(gt, p.channels())?;
    let shape_err = |e: tanhpolar::Error| match e {
        tanhpolar::Error::ShapeMismatch(m) => CliError::Shape(m),
        e => CliError::Usage(e.to_string()),
    };
    let ce = metrics::cross_entropy_stats(&p, &mask).map_err(shape_err)?;
    let dice = metrics::dice_loss(&p, &mask).map_err(shape_err)?;
    let combined = metrics::combined_loss(&p, &mask, cfg.loss_weights()).map_err(shape_err)?;
    Ok((ce.loss, dice, combined, ce.clamped_pixels))
}
