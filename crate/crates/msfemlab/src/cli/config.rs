//! Run configuration: a flat key=value text format (one pair per line, `#`
//! comments) with command-line flags overriding file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::{CoefficientField, SourceField, Tensor2};
use crate::solvers::Variant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Compare,
    Converge,
    HomogCheck,
    Identities,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "solve" => Ok(Command::Solve),
            "compare" => Ok(Command::Compare),
            "converge" => Ok(Command::Converge),
            "homog-check" => Ok(Command::HomogCheck),
            "identities" => Ok(Command::Identities),
            other => Err(Error::Usage(format!(
                "unknown command '{other}' (expected solve, compare, converge, homog-check or identities)"
            ))),
        }
    }
}

/// Parsed and validated configuration of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub coefficient: CoefficientField,
    pub source: SourceField,
    pub n: usize,
    pub level: u32,
    pub n_ref: usize,
    pub n_list: Vec<usize>,
    pub eps_list: Option<Vec<f64>>,
    pub variant: Variant,
    pub solver: String,
    pub tol: f64,
    pub max_iterations: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub full_scale: bool,
}

impl RunConfig {
    /// Fine mesh size 1/(n 2^r).
    pub fn fine_h(&self) -> f64 {
        1.0 / (self.n as f64 * (1u64 << self.level) as f64)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "coefficient",
    "epsilon",
    "amplitude",
    "a_minus",
    "a_plus",
    "value",
    "matrix",
    "source",
    "source_value",
    "source_k",
    "n",
    "r",
    "n_ref",
    "n_list",
    "eps_list",
    "variant",
    "solver",
    "tol",
    "maxit",
    "output_dir",
    "seed",
    "workers",
    "full_scale",
];

pub fn help_text() -> String {
    let mut s = String::from(
        "msfemlab <command> [--config FILE] [--key value]... [--full-scale]\n\
         \n\
         commands:\n\
         \x20 solve        run one solution path, write solution_<variant>.csv (+ tensors.csv)\n\
         \x20 compare      all paths at one (n, r) against the n_ref reference, write errors.csv\n\
         \x20 converge     sweep n_list against the n_ref reference, write errors.csv\n\
         \x20 homog-check  layered effective tensors vs the analytic limit, write homog.csv\n\
         \x20 identities   discrete identity deviations, write identities.txt (exit 1 on violation)\n\
         \n\
         configuration (file keys and --key flags; flags win):\n\
         \x20 coefficient   periodic | layered | constant | constant-matrix   [periodic]\n\
         \x20 epsilon       oscillation period                                [pi/50]\n\
         \x20 amplitude     periodic contrast                                 [100]\n\
         \x20 a_minus a_plus  layered values                                  [1, 4]\n\
         \x20 value         constant coefficient                              [1]\n\
         \x20 matrix        a11,a12,a21,a22 for constant-matrix\n\
         \x20 source        trig | constant | manufactured                    [trig]\n\
         \x20 source_value  constant source value                             [1]\n\
         \x20 source_k      manufactured frequency                            [1]\n\
         \x20 n             coarse divisions per side                         [8]\n\
         \x20 r             refinement levels per element                     [3]\n\
         \x20 n_ref         reference divisions (compare/converge)            [256]\n\
         \x20 n_list        comma-separated coarse divisions (converge)       [4,8,16,32]\n\
         \x20 eps_list      comma-separated periods (homog-check)             [H/8,H/16,H/32]\n\
         \x20 variant       galerkin | petrov-galerkin | nonintrusive | reference [nonintrusive]\n\
         \x20 solver        direct | cg                                       [direct]\n\
         \x20 tol           cg tolerance                                      [1e-12]\n\
         \x20 maxit         cg iteration cap                                  [200000]\n\
         \x20 output_dir    where csv/report files go                         [.]\n\
         \x20 seed          seed for randomized bound probes                  [0]\n\
         \x20 workers       offline worker threads, 0 = all cores            [MSFEMLAB_WORKERS or 0]\n\
         \x20 full_scale    switch to epsilon = pi/150, n_ref = 1024\n",
    );
    s.push('\n');
    s
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::Usage(format!("key '{key}': cannot parse '{v}' as a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::Usage(format!("key '{key}': cannot parse '{v}' as an integer")))
}

/// Read a flat key=value file; `#` starts a comment, blank lines allowed.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Usage(format!(
                "config line {}: expected key=value, got '{raw}'",
                lineno + 1
            ))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Build a validated configuration from the file map overlaid with flag
/// values (flags win).
pub fn build_config(
    command: Command,
    file: &BTreeMap<String, String>,
    flags: &BTreeMap<String, String>,
) -> Result<RunConfig> {
    for key in file.keys().chain(flags.keys()) {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Usage(format!("unknown key '{key}'")));
        }
    }
    let full_scale = {
        let get = |m: &BTreeMap<String, String>| m.get("full_scale").cloned();
        match get(flags).or_else(|| get(file)) {
            None => false,
            Some(v) => match v.as_str() {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                other => {
                    return Err(Error::Usage(format!(
                        "key 'full_scale': expected true/false, got '{other}'"
                    )))
                }
            },
        }
    };

    // defaults, then the full-scale preset, then file, then flags
    let mut merged: BTreeMap<String, String> = BTreeMap::new();
    if full_scale {
        merged.insert("epsilon".into(), format!("{:.17e}", std::f64::consts::PI / 150.0));
        merged.insert("n_ref".into(), "1024".into());
    }
    for (k, v) in file {
        merged.insert(k.clone(), v.clone());
    }
    for (k, v) in flags {
        merged.insert(k.clone(), v.clone());
    }
    let get = |k: &str| merged.get(k).map(|s| s.as_str());

    let epsilon = match get("epsilon") {
        Some(v) => parse_f64("epsilon", v)?,
        None => std::f64::consts::PI / 50.0,
    };
    if epsilon <= 0.0 {
        return Err(Error::Usage(format!(
            "key 'epsilon': must be positive, got {epsilon}"
        )));
    }

    let coefficient = match get("coefficient").unwrap_or("periodic") {
        "periodic" => {
            let amplitude = match get("amplitude") {
                Some(v) => parse_f64("amplitude", v)?,
                None => 100.0,
            };
            if amplitude < 0.0 {
                return Err(Error::Usage(format!(
                    "key 'amplitude': must be nonnegative, got {amplitude}"
                )));
            }
            CoefficientField::Periodic { epsilon, amplitude }
        }
        "layered" => {
            let a_minus = match get("a_minus") {
                Some(v) => parse_f64("a_minus", v)?,
                None => 1.0,
            };
            let a_plus = match get("a_plus") {
                Some(v) => parse_f64("a_plus", v)?,
                None => 4.0,
            };
            if a_minus <= 0.0 || a_plus <= 0.0 {
                return Err(Error::Usage(
                    "key 'a_minus'/'a_plus': layer values must be positive".into(),
                ));
            }
            CoefficientField::Layered { epsilon, a_minus, a_plus }
        }
        "constant" => {
            let value = match get("value") {
                Some(v) => parse_f64("value", v)?,
                None => 1.0,
            };
            if value <= 0.0 {
                return Err(Error::Usage(format!(
                    "key 'value': must be positive, got {value}"
                )));
            }
            CoefficientField::Constant(value)
        }
        "constant-matrix" => {
            let raw = get("matrix").ok_or_else(|| {
                Error::Usage("key 'matrix': required for coefficient constant-matrix".into())
            })?;
            let parts: Vec<&str> = raw.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::Usage(format!(
                    "key 'matrix': expected a11,a12,a21,a22, got '{raw}'"
                )));
            }
            let e: Vec<f64> = parts
                .iter()
                .map(|p| parse_f64("matrix", p))
                .collect::<Result<_>>()?;
            let t = Tensor2::new([[e[0], e[1]], [e[2], e[3]]]);
            if t.sym_eigen_min() <= 0.0 {
                return Err(Error::Usage(
                    "key 'matrix': symmetric part must be positive definite".into(),
                ));
            }
            CoefficientField::ConstantMatrix(t)
        }
        other => {
            return Err(Error::Usage(format!(
                "key 'coefficient': unknown kind '{other}'"
            )))
        }
    };

    let source = match get("source").unwrap_or("trig") {
        "trig" => SourceField::Trig,
        "constant" => {
            let value = match get("source_value") {
                Some(v) => parse_f64("source_value", v)?,
                None => 1.0,
            };
            SourceField::Constant(value)
        }
        "manufactured" => {
            let k = match get("source_k") {
                Some(v) => parse_usize("source_k", v)? as u32,
                None => 1,
            };
            if k == 0 {
                return Err(Error::Usage("key 'source_k': must be at least 1".into()));
            }
            SourceField::Manufactured { k }
        }
        other => {
            return Err(Error::Usage(format!("key 'source': unknown kind '{other}'")))
        }
    };

    let n = match get("n") {
        Some(v) => parse_usize("n", v)?,
        None => 8,
    };
    if n < 2 {
        return Err(Error::Usage(format!("key 'n': must be at least 2, got {n}")));
    }
    let level = match get("r") {
        Some(v) => parse_usize("r", v)? as u32,
        None => 3,
    };
    let n_ref = match get("n_ref") {
        Some(v) => parse_usize("n_ref", v)?,
        None => 256,
    };
    if n_ref < 2 {
        return Err(Error::Usage(format!(
            "key 'n_ref': must be at least 2, got {n_ref}"
        )));
    }

    let n_list = match get("n_list") {
        Some(v) => {
            let list: Vec<usize> = v
                .split(',')
                .map(|p| parse_usize("n_list", p))
                .collect::<Result<_>>()?;
            if list.is_empty() {
                return Err(Error::Usage("key 'n_list': empty list".into()));
            }
            list
        }
        None => vec![4, 8, 16, 32],
    };

    let eps_list = match get("eps_list") {
        Some(v) => Some(
            v.split(',')
                .map(|p| parse_f64("eps_list", p))
                .collect::<Result<Vec<f64>>>()?,
        ),
        None => None,
    };
    if let Some(list) = &eps_list {
        if list.iter().any(|&e| e <= 0.0) {
            return Err(Error::Usage("key 'eps_list': periods must be positive".into()));
        }
    }

    let variant = match get("variant").unwrap_or("nonintrusive") {
        "galerkin" => Variant::Galerkin,
        "petrov-galerkin" => Variant::PetrovGalerkin,
        "nonintrusive" => Variant::NonIntrusive,
        "reference" => Variant::Reference,
        other => {
            return Err(Error::Usage(format!(
                "key 'variant': unknown variant '{other}'"
            )))
        }
    };

    let solver = get("solver").unwrap_or("direct").to_string();
    if solver != "direct" && solver != "cg" {
        return Err(Error::Usage(format!(
            "key 'solver': expected direct or cg, got '{solver}'"
        )));
    }
    let tol = match get("tol") {
        Some(v) => parse_f64("tol", v)?,
        None => 1e-12,
    };
    if tol <= 0.0 {
        return Err(Error::Usage(format!("key 'tol': must be positive, got {tol}")));
    }
    let max_iterations = match get("maxit") {
        Some(v) => parse_usize("maxit", v)?,
        None => 200_000,
    };

    let output_dir = PathBuf::from(get("output_dir").unwrap_or("."));
    let seed = match get("seed") {
        Some(v) => parse_usize("seed", v)? as u64,
        None => 0,
    };
    let workers = match get("workers") {
        Some(v) => parse_usize("workers", v)?,
        None => match std::env::var("MSFEMLAB_WORKERS") {
            Ok(v) => parse_usize("workers", &v)?,
            Err(_) => 0,
        },
    };

    Ok(RunConfig {
        command,
        coefficient,
        source,
        n,
        level,
        n_ref,
        n_list,
        eps_list,
        variant,
        solver,
        tol,
        max_iterations,
        output_dir,
        seed,
        workers,
        full_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_apply_with_empty_inputs() {
        let cfg = build_config(Command::Solve, &BTreeMap::new(), &BTreeMap::new()).unwrap();
        assert_eq!(cfg.n, 8);
        assert_eq!(cfg.level, 3);
        assert_eq!(cfg.n_ref, 256);
        assert!(matches!(cfg.coefficient, CoefficientField::Periodic { .. }));
        assert!(matches!(cfg.source, SourceField::Trig));
    }

    #[test]
    fn zero_epsilon_is_a_usage_error_naming_the_key() {
        let err =
            build_config(Command::Solve, &BTreeMap::new(), &flags(&[("epsilon", "0")])).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert!(err.to_string().contains("epsilon"));
    }

    #[test]
    fn flags_override_file_values() {
        let file = flags(&[("n", "4"), ("r", "2")]);
        let cli = flags(&[("n", "16")]);
        let cfg = build_config(Command::Solve, &file, &cli).unwrap();
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.level, 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = build_config(Command::Solve, &flags(&[("nn", "4")]), &BTreeMap::new())
            .unwrap_err();
        assert!(err.to_string().contains("nn"));
    }

    #[test]
    fn full_scale_preset_yields_paper_parameters_but_explicit_keys_win() {
        let cfg = build_config(
            Command::Converge,
            &BTreeMap::new(),
            &flags(&[("full_scale", "true")]),
        )
        .unwrap();
        assert!((cfg.coefficient.epsilon().unwrap() - std::f64::consts::PI / 150.0).abs() < 1e-15);
        assert_eq!(cfg.n_ref, 1024);

        let cfg = build_config(
            Command::Converge,
            &BTreeMap::new(),
            &flags(&[("full_scale", "true"), ("n_ref", "512")]),
        )
        .unwrap();
        assert_eq!(cfg.n_ref, 512);
    }

    #[test]
    fn config_file_parsing_skips_comments() {
        let dir = std::env::temp_dir().join("msfemlab_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.cfg");
        std::fs::write(&path, "# comment\nn = 4\nr=1  # trailing\n\n").unwrap();
        let map = read_config_file(&path).unwrap();
        assert_eq!(map.get("n").map(String::as_str), Some("4"));
        assert_eq!(map.get("r").map(String::as_str), Some("1"));
    }
}
