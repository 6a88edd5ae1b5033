//! Run configuration: defaults, then a `key=value` file, then
//! `TANHPOLAR_*` environment variables, then command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use tanhpolar::metrics::LossWeights;
use tanhpolar::warp::{AugmentParams, BorderPolicy, DEFAULT_SIZE};
use tanhpolar::BBox;

use crate::error::{CliError, Result};
use crate::formats::png::Palette;
use crate::formats::report;

pub const ENV_PREFIX: &str = "TANHPOLAR_";

/// Keys accepted in config files; the environment form is the upper-cased
/// key behind [`ENV_PREFIX`].
pub const KEYS: [&str; 9] = [
    "size", "bbox", "border", "lambda", "shift", "scale_lo", "scale_hi", "seed", "palette",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub height: usize,
    pub width: usize,
    pub border: BorderPolicy,
    pub lambda: f64,
    pub augment: AugmentParams,
    pub palette: Palette,
    /// Default box for commands that take one.
    pub bbox: Option<BBoxSpec>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            height: DEFAULT_SIZE,
            width: DEFAULT_SIZE,
            border: BorderPolicy::Zero,
            lambda: 0.5,
            augment: AugmentParams::default(),
            palette: Palette::face11(),
            bbox: None,
        }
    }
}

impl Config {
    /// Applies one setting. `source` names where it came from for errors.
    pub fn set(&mut self, key: &str, value: &str, source: &str) -> Result<()> {
        let bad = |what: &str| CliError::Usage(format!("{source}: {key}: {what} {value:?}"));
        let value = value.trim();
        match key {
            "size" => {
                (self.height, self.width) = parse_size(value).map_err(|e| bad(&e))?;
            }
            "bbox" => self.bbox = Some(BBoxSpec::parse(value)?),
            "border" => {
                self.border = match value {
                    "zero" => BorderPolicy::Zero,
                    "replicate" => BorderPolicy::Replicate,
                    _ => return Err(bad("expected zero|replicate, got")),
                }
            }
            "lambda" => {
                let v = value.parse().map_err(|_| bad("not a number:"))?;
                LossWeights::new(v).map_err(|e| bad(&e.to_string()))?;
                self.lambda = v;
            }
            "shift" => self.augment.max_shift_frac = value.parse().map_err(|_| bad("not a number:"))?,
            "scale_lo" => self.augment.scale_lo = value.parse().map_err(|_| bad("not a number:"))?,
            "scale_hi" => self.augment.scale_hi = value.parse().map_err(|_| bad("not a number:"))?,
            "seed" => self.augment.seed = value.parse().map_err(|_| bad("not an unsigned integer:"))?,
            "palette" => self.palette = Palette::parse(value).map_err(|e| bad(&e))?,
            _ => {
                return Err(CliError::Usage(format!(
                    "{source}: unknown key {key:?} (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let map = report::parse(&text).map_err(|e| CliError::decode(path, e))?;
        let source = path.display().to_string();
        for (k, v) in &map {
            self.set(k, v, &source)?;
        }
        Ok(())
    }

    /// Applies every `TANHPOLAR_<KEY>` found in `vars`.
    pub fn apply_env(&mut self, vars: &BTreeMap<String, String>) -> Result<()> {
        for key in KEYS {
            let name = format!("{ENV_PREFIX}{}", key.to_uppercase());
            if let Some(v) = vars.get(&name) {
                self.set(key, v, &name)?;
            }
        }
        Ok(())
    }

    /// Checks cross-field constraints once all layers are applied.
    pub fn validate(&self) -> Result<()> {
        self.augment
            .validate()
            .map_err(|e| CliError::Usage(format!("augmentation: {e}")))
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights::new(self.lambda).expect("lambda validated on set")
    }
}

/// Parses `HxW` (or a single `N` for a square raster).
pub fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let parse = |p: &str| match p.trim().parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("bad dimension {p:?} in size {s:?}")),
        Ok(n) => Ok(n),
    };
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => parse(s).map(|n| (n, n)),
    }
}

/// A bounding box as given on the command line: `x,y,w,h`, or the path of a
/// file whose first line holds that string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBoxSpec(pub BBox);

impl BBoxSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if !s.contains(',') && Path::new(s).is_file() {
            return Self::from_file(Path::new(s));
        }
        Self::parse_str(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
        Self::parse_str(line).map_err(|e| CliError::BBox(format!("{}: {e}", path.display())))
    }

    fn parse_str(s: &str) -> Result<Self> {
        const FIELDS: [&str; 4] = ["x", "y", "w", "h"];
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(CliError::BBox(format!("bounding box: expected x,y,w,h, got {s:?}")));
        }
        let mut v = [0.0; 4];
        for ((slot, part), field) in v.iter_mut().zip(&parts).zip(FIELDS) {
            *slot = part
                .parse()
                .map_err(|_| CliError::BBox(format!("bounding box field {field} = {part:?} is not a number")))?;
        }
        Ok(Self(BBox::new(v[0], v[1], v[2], v[3])?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("512"), Ok((512, 512)));
        assert_eq!(parse_size("64x128"), Ok((64, 128)));
        assert!(parse_size("0x4").is_err());
        assert!(parse_size("4x").is_err());
    }

    #[test]
    fn bbox_strings() {
        let b = BBoxSpec::parse(" 1, 2.5 ,3,4 ").unwrap().0;
        assert_eq!((b.x(), b.y(), b.w(), b.h()), (1.0, 2.5, 3.0, 4.0));
        let e = BBoxSpec::parse("0,0,-5,10").unwrap_err();
        assert_eq!(e.exit_code(), crate::error::exit::BBOX);
        assert!(e.to_string().contains('w'), "{e}");
        let e = BBoxSpec::parse("0,0,5,abc").unwrap_err();
        assert!(e.to_string().contains("field h"), "{e}");
        assert_eq!(BBoxSpec::parse("1,2,3").unwrap_err().exit_code(), 3);
    }

    #[test]
    fn layering() {
        let mut c = Config::default();
        let env: BTreeMap<String, String> = [
            ("TANHPOLAR_SIZE".to_string(), "32x16".to_string()),
            ("TANHPOLAR_SEED".to_string(), "9".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ]
        .into();
        c.apply_env(&env).unwrap();
        assert_eq!((c.height, c.width, c.augment.seed), (32, 16, 9));
        c.set("border", "replicate", "flag").unwrap();
        assert_eq!(c.border, BorderPolicy::Replicate);
        assert!(c.set("lambda", "1.5", "flag").is_err());
        assert!(c.set("nope", "1", "flag").is_err());
        c.set("scale_lo", "2", "flag").unwrap();
        assert!(c.validate().is_err());
    }
}
