//! Run configuration file: TOML with `[problem]`, `[ladder]`, `[window]`,
//! `[solver]` and `[output]` sections.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use ultramorse::{LadderConfig, NatPoly, ProblemSource, SolverConfig, Window};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub ladder: LadderSection,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub preset: Option<String>,
    pub mu: Option<f64>,
    pub expression: Option<String>,
    /// File holding the integrand expression, relative to the config file.
    pub expression_file: Option<PathBuf>,
    pub domain: Option<[f64; 2]>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSection {
    pub levels: Vec<usize>,
    pub match_tol: Option<f64>,
    pub panels_per_mode: usize,
    pub points_per_panel: usize,
}

impl Default for LadderSection {
    fn default() -> Self {
        let d = LadderConfig::default();
        Self {
            levels: d.levels,
            match_tol: d.match_tol,
            panels_per_mode: d.panels_per_mode,
            points_per_panel: d.points_per_panel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    FullCoercive,
    Range,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub kind: WindowKind,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Betti polynomial in text form, e.g. `"1 + t"`.
    pub betti: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub json: String,
    pub csv: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("."), json: "trace.json".into(), csv: "trace.csv".into() }
    }
}

/// Overrides from flags and `ULTRAMORSE_*` variables.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub levels: Option<Vec<usize>>,
}

impl RunConfig {
    /// Reads and parses a config file; syntax errors carry `path:line:column`.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let cfg = Self::parse(&text).map_err(|e| anyhow::anyhow!("{}:{e}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    /// Parses TOML text; the error message starts with `line:column:`.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let (line, col) = e.span().map_or((1, 1), |s| line_column(text, s.start));
            format!("{line}:{col}: {}", e.message())
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.solver.seed = seed;
        }
        if let Some(dir) = &o.out_dir {
            self.output.dir = dir.clone();
        }
        if let Some(levels) = &o.levels {
            self.ladder.levels = levels.clone();
        }
    }

    /// `base` resolves a relative `expression_file`.
    pub fn problem_source(&self, base: &Path) -> Result<ProblemSource> {
        let p = &self.problem;
        let expression = match (&p.expression, &p.expression_file) {
            (Some(_), Some(_)) => bail!("[problem] sets both expression and expression_file"),
            (Some(e), None) => Some(e.clone()),
            (None, Some(f)) => {
                let path = base.join(f);
                let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
                Some(text.trim().to_string())
            }
            (None, None) => None,
        };
        Ok(ProblemSource { preset: p.preset.clone(), mu: p.mu, expression, domain: p.domain, label: p.label.clone() })
    }

    pub fn ladder_config(&self) -> Result<LadderConfig> {
        let w = &self.window;
        let window = match w.kind {
            WindowKind::FullCoercive => {
                if w.a.is_some() || w.b.is_some() {
                    bail!("window error: full_coercive takes no bounds");
                }
                Window::FullCoercive
            }
            WindowKind::Range => {
                let (Some(a), Some(b)) = (w.a, w.b) else {
                    bail!("window error: a range window needs both a and b");
                };
                if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
                    bail!("window error: need a < b, got a = {a}, b = {b}");
                }
                let betti = w.betti.as_deref().map(str::parse::<NatPoly>).transpose().context("window error: betti")?;
                Window::Range { a, b, betti }
            }
        };
        let cfg = LadderConfig {
            levels: self.ladder.levels.clone(),
            window,
            solver: self.solver.clone(),
            match_tol: self.ladder.match_tol,
            panels_per_mode: self.ladder.panels_per_mode,
            points_per_panel: self.ladder.points_per_panel,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Comma-separated list, e.g. `4,8,16`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| anyhow::anyhow!("invalid list entry {t:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::parse("[problem]\npreset = \"chafee_infante\"\nmu = 2.5\n").unwrap();
        let lc = cfg.ladder_config().unwrap();
        assert_eq!(lc.levels, vec![4, 8, 16, 32]);
        assert_eq!(lc.window, Window::FullCoercive);
        assert_eq!(cfg.output.json, "trace.json");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = RunConfig::parse("[problem]\npreset = \"chafee_infante\"\nmu = = 2\n").unwrap_err();
        assert!(err.starts_with("3:"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("[problem]\npreset = \"x\"\nmuu = 2\n").unwrap_err();
        assert!(err.starts_with("3:1:"), "{err}");
    }

    #[test]
    fn reversed_window_rejected() {
        let cfg =
            RunConfig::parse("[problem]\npreset = \"chafee_infante\"\nmu = 2.5\n[window]\nkind = \"range\"\na = 1.0\nb = -1.0\nbetti = \"1\"\n")
                .unwrap();
        assert!(cfg.ladder_config().unwrap_err().to_string().contains("window error"));
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::parse("[problem]\npreset = \"chafee_infante\"\nmu = 2.5\n").unwrap();
        cfg.apply(&Overrides { seed: Some(7), out_dir: Some("o".into()), levels: Some(vec![2, 4]) });
        assert_eq!(cfg.solver.seed, 7);
        assert_eq!(cfg.ladder.levels, vec![2, 4]);
        assert_eq!(cfg.output.dir, PathBuf::from("o"));
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<f64>("0.5, 2.5,5").unwrap(), vec![0.5, 2.5, 5.0]);
        assert!(parse_list::<f64>("").unwrap().is_empty());
        assert!(parse_list::<usize>("4,x").is_err());
    }
}
