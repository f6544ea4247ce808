//! Solver configuration assembly: built-in defaults, then a `key = value`
//! config file, then command-line flags, each layer overriding the last.

use std::path::Path;

use subcubic::cubic::InnerStop;
use subcubic::driver::{ArcConfig, CoarseAccuracy, HessianVariant};

use crate::CliError;

/// Parses a variant token. The comparison tables use short names: `sub` is
/// the constant-accuracy baseline, `fix` the fixed-fraction one (its
/// fraction comes from `--p`).
pub fn parse_variant(token: &str, p: Option<f64>, c: Option<f64>) -> Result<HessianVariant, CliError> {
    let variant = match token {
        "dynamic" => HessianVariant::Dynamic,
        "safeguarded" => HessianVariant::DynamicSafeguarded { rho: None },
        "full" => HessianVariant::Full,
        "constant" | "sub" => HessianVariant::ConstantAccuracy { c },
        "step-prop" => HessianVariant::StepProportional { chi: None },
        "fix" => {
            let p = p.ok_or_else(|| {
                CliError::input("variant `fix` needs --p <fraction in (0,1)>")
            })?;
            HessianVariant::FixedFraction { p }
        }
        other => {
            return Err(CliError::input(format!(
                "unknown variant `{other}` (expected dynamic, safeguarded, full, constant/sub, step-prop, or fix)"
            )))
        }
    };
    Ok(variant)
}

/// Canonical token for a variant, used in file names and table rows.
pub fn variant_token(v: &HessianVariant) -> &'static str {
    match v {
        HessianVariant::Dynamic => "dynamic",
        HessianVariant::DynamicSafeguarded { .. } => "safeguarded",
        HessianVariant::Full => "full",
        HessianVariant::ConstantAccuracy { .. } => "sub",
        HessianVariant::StepProportional { .. } => "step-prop",
        HessianVariant::FixedFraction { .. } => "fix",
    }
}

/// Applies one `key = value` override to the configuration.
pub fn apply_override(cfg: &mut ArcConfig, key: &str, value: &str) -> Result<(), CliError> {
    fn num(key: &str, value: &str) -> Result<f64, CliError> {
        value
            .parse::<f64>()
            .map_err(|_| CliError::input(format!("bad numeric value for `{key}`: `{value}`")))
    }
    fn int(key: &str, value: &str) -> Result<u64, CliError> {
        value
            .parse::<u64>()
            .map_err(|_| CliError::input(format!("bad integer value for `{key}`: `{value}`")))
    }
    match key {
        "sigma0" => cfg.sigma0 = num(key, value)?,
        "sigma_min" => cfg.sigma_min = num(key, value)?,
        "eta1" => cfg.eta1 = num(key, value)?,
        "eta2" => cfg.eta2 = num(key, value)?,
        "gamma1" => cfg.gamma1 = num(key, value)?,
        "gamma2" => cfg.gamma2 = num(key, value)?,
        "gamma3" => cfg.gamma3 = num(key, value)?,
        "alpha" => cfg.alpha = num(key, value)?,
        "theta" => cfg.theta = num(key, value)?,
        "eps" => cfg.eps = num(key, value)?,
        "delta_bar" => cfg.delta_bar = num(key, value)?,
        "max_iters" => cfg.max_iters = int(key, value)?,
        "f_rel_stop" => cfg.f_rel_stop = num(key, value)?,
        "inner_budget" => cfg.inner_budget = int(key, value)?,
        "eig_budget" => cfg.eig_budget = int(key, value)?,
        "eig_tol" => cfg.eig_tol = num(key, value)?,
        "inner_stop" => {
            cfg.inner_stop = match value {
                "relative-grad" => InnerStop::RelativeGrad,
                "step-squared" => InnerStop::StepSquared,
                "step-scaled" => InnerStop::StepScaled,
                other => {
                    return Err(CliError::input(format!(
                        "bad inner_stop `{other}` (expected relative-grad, step-squared, or step-scaled)"
                    )))
                }
            }
        }
        "coarse_fixed" => cfg.coarse = CoarseAccuracy::Fixed(num(key, value)?),
        "coarse_frac" => cfg.coarse = CoarseAccuracy::SampleFraction(num(key, value)?),
        other => return Err(CliError::input(format!("unknown config key `{other}`"))),
    }
    Ok(())
}

/// Reads a config file of `key = value` lines; `#` starts a comment and
/// blank lines are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::input(format!("config line {}: expected `key = value`", i + 1))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Defaults, config file, flag overrides — in that order. The assembled
/// configuration is validated before use.
pub fn assemble(
    config_path: Option<&Path>,
    flag_overrides: &[(String, String)],
) -> Result<ArcConfig, CliError> {
    let mut cfg = ArcConfig::default();
    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        for (k, v) in parse_config_text(&text)? {
            apply_override(&mut cfg, &k, &v)?;
        }
    }
    for (k, v) in flag_overrides {
        apply_override(&mut cfg, k, v)?;
    }
    cfg.validate().map_err(|e| CliError::input(e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_tokens_round_trip() {
        for token in ["dynamic", "safeguarded", "full", "step-prop"] {
            let v = parse_variant(token, None, None).unwrap();
            assert_eq!(variant_token(&v), token);
        }
        assert_eq!(
            variant_token(&parse_variant("sub", None, None).unwrap()),
            "sub"
        );
        assert_eq!(
            variant_token(&parse_variant("constant", None, None).unwrap()),
            "sub"
        );
        assert!(matches!(
            parse_variant("fix", Some(0.05), None).unwrap(),
            HessianVariant::FixedFraction { p } if p == 0.05
        ));
        assert!(parse_variant("fix", None, None).is_err());
        assert!(parse_variant("kaboom", None, None).is_err());
    }

    #[test]
    fn precedence_is_defaults_then_file_then_flags() {
        let dir = std::env::temp_dir().join("subcubic-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("solver.conf");
        std::fs::write(&path, "eps = 1e-4  # tighter\ntheta = 0.25\n").unwrap();
        let flags = vec![("theta".to_string(), "0.75".to_string())];
        let cfg = assemble(Some(&path), &flags).unwrap();
        assert_eq!(cfg.eps, 1e-4); // from file
        assert_eq!(cfg.theta, 0.75); // flag beats file
        assert_eq!(cfg.sigma0, 0.1); // untouched default
    }

    #[test]
    fn bad_inputs_are_input_errors() {
        let mut cfg = ArcConfig::default();
        assert!(apply_override(&mut cfg, "eps", "fast").is_err());
        assert!(apply_override(&mut cfg, "warp_speed", "9").is_err());
        assert!(parse_config_text("eps 1e-3").is_err());
        // Validation failures surface as input errors too.
        let flags = vec![("theta".to_string(), "1.5".to_string())];
        let err = assemble(None, &flags).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let pairs = parse_config_text("# all defaults\n\n  \nsigma0 = 0.2 # bigger\n").unwrap();
        assert_eq!(pairs, vec![("sigma0".to_string(), "0.2".to_string())]);
    }
}