//! Named verification suites run against a scenario, and the report bundle
//! they produce: `report.json` (deterministic), `metadata.json`
//! (timestamps), one CSV and one SVG per plot series, and extra CSV files.

mod builtin;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conformal::{volume, HypothesisBounds};
use crate::error::{invalid, Error, Result};
use crate::mean::MeanTarget;
use crate::report::{CheckRecord, Series, SeriesKind};
use crate::scenarios::{Scenario, ScenarioRegistry, ScenarioSpec};
use crate::sphere::{derive_seed, uniform_sphere_sampling, SamplingSpec, SphereSampling};
use crate::tolerances;

pub use builtin::{Regularity, SingularSet, SphericalMean, TotalScalar, Truncation};

pub const DEFAULT_RESOLUTION: usize = 32;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const DEFAULT_PROBES: usize = 1000;

fn default_suite() -> String {
    "all".into()
}

fn default_h() -> f64 {
    tolerances::DEFAULT_STEP
}

fn default_probes() -> usize {
    DEFAULT_PROBES
}

/// Everything that determines a report. Readable from a TOML/JSON config
/// with the scenario under `[scenario]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteRun {
    #[serde(default = "default_suite")]
    pub suite: String,
    pub scenario: ScenarioSpec,
    /// Product-rule resolution (also sets the tangent resolution of polar rules).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// Monte-Carlo sample count; overrides the scenario's default rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_h")]
    pub h: f64,
    /// Absolute tolerances by check name, replacing the built-in ones.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    /// Forces the mean-value target instead of the dimension default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<MeanTarget>,
}

impl SuiteRun {
    pub fn new(suite: &str, scenario: ScenarioSpec) -> Self {
        Self {
            suite: suite.into(),
            scenario,
            resolution: None,
            samples: None,
            probes: DEFAULT_PROBES,
            seed: 0,
            h: tolerances::DEFAULT_STEP,
            tolerances: BTreeMap::new(),
            target: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(serde_json::from_str(&text)?),
            Some("toml") => toml::from_str(&text).map_err(|e| Error::Config(e.to_string())),
            _ => Err(Error::Config(format!(
                "unrecognized config extension: {}",
                path.display()
            ))),
        }
    }
}

/// Inputs shared by every suite of one run.
pub struct SuiteContext {
    pub run: SuiteRun,
    pub scenario: Scenario,
    pub sampling: SphereSampling,
    pub probes: SphereSampling,
    pub bounds: HypothesisBounds,
}

impl SuiteContext {
    pub fn new(run: SuiteRun, scenarios: &ScenarioRegistry) -> Result<Self> {
        if !(run.h > 0.0 && run.h <= tolerances::MAX_STEP) {
            return Err(Error::OutOfRange {
                name: "h",
                value: run.h,
                range: format!("(0, {}]", tolerances::MAX_STEP),
            });
        }
        if run.probes == 0 {
            return invalid("probe count must be positive");
        }
        let scenario = scenarios.build(&run.scenario)?;
        let n = scenario.dimension();
        let sampling = match run.samples {
            Some(count) => uniform_sphere_sampling(n, count, derive_seed(run.seed, &[1]))?,
            None => scenario.default_sampling(run.resolution.unwrap_or(DEFAULT_RESOLUTION), DEFAULT_MC_SAMPLES)?,
        };
        let probes = uniform_sphere_sampling(n, run.probes, derive_seed(run.seed, &[2]))?;
        // Fixed from the first element so later elements can violate them.
        let bounds = HypothesisBounds::covering(n, &[volume(scenario.first(), &sampling)])?;
        Ok(Self {
            run,
            scenario,
            sampling,
            probes,
            bounds,
        })
    }

    pub fn n(&self) -> usize {
        self.scenario.dimension()
    }

    pub fn h(&self) -> f64 {
        self.run.h
    }

    pub fn seed(&self) -> u64 {
        self.run.seed
    }
}

/// Results of one suite.
#[derive(Clone, Debug, Serialize)]
pub struct Section {
    pub suite: String,
    pub records: Vec<CheckRecord>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl Section {
    pub fn new(suite: &str) -> Self {
        Self {
            suite: suite.into(),
            records: Vec::new(),
            details: BTreeMap::new(),
            skipped: Vec::new(),
        }
    }

    pub fn detail(&mut self, key: impl Into<String>, value: &impl Serialize) -> Result<()> {
        self.details.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(CheckRecord::passed)
    }
}

/// A file written next to the report.
#[derive(Clone, Debug)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug)]
pub struct SuiteOutput {
    pub section: Section,
    pub series: Vec<Series>,
    pub files: Vec<OutputFile>,
}

impl SuiteOutput {
    pub fn new(suite: &str) -> Self {
        Self {
            section: Section::new(suite),
            series: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn record(&mut self, r: CheckRecord) {
        self.section.records.push(r);
    }

    pub fn records(&mut self, rs: impl IntoIterator<Item = CheckRecord>) {
        self.section.records.extend(rs);
    }

    pub fn skip(&mut self, why: impl Into<String>) {
        self.section.skipped.push(why.into());
    }
}

/// A named verification suite.
pub trait Suite: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    /// Why the suite cannot run on this scenario, if it cannot.
    fn unsupported(&self, _scenario: &Scenario) -> Option<String> {
        None
    }
    fn run(&self, ctx: &SuiteContext) -> Result<SuiteOutput>;
}

/// Suites in execution order; `all` runs every applicable one.
pub struct SuiteRegistry {
    suites: Vec<Box<dyn Suite>>,
}

impl Default for SuiteRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Regularity));
        r.register(Box::new(SphericalMean));
        r.register(Box::new(Truncation));
        r.register(Box::new(SingularSet));
        r.register(Box::new(TotalScalar));
        r
    }
}

impl SuiteRegistry {
    pub fn empty() -> Self {
        Self { suites: Vec::new() }
    }

    /// Adds a suite, replacing any with the same name.
    pub fn register(&mut self, suite: Box<dyn Suite>) {
        self.suites.retain(|s| s.name() != suite.name());
        self.suites.push(suite);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.suites.iter().map(|s| s.name())
    }

    pub fn get(&self, name: &str) -> Result<&dyn Suite> {
        self.suites
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "suite",
                name: name.into(),
            })
    }

    /// The suites selected by `name` (`all` expands to every suite).
    pub fn select(&self, name: &str) -> Result<Vec<&dyn Suite>> {
        if name == "all" {
            Ok(self.suites.iter().map(|s| s.as_ref()).collect())
        } else {
            Ok(vec![self.get(name)?])
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
}

/// The deterministic part of a run's output.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub run: SuiteRun,
    /// The scenario with every default filled in.
    pub scenario: ScenarioSpec,
    pub sampling: SamplingSpec,
    pub probes: SamplingSpec,
    pub bounds: HypothesisBounds,
    pub sections: Vec<Section>,
    pub summary: Summary,
    pub passed: bool,
}

impl Report {
    pub fn failed_records(&self) -> impl Iterator<Item = (&str, &CheckRecord)> {
        self.sections.iter().flat_map(|s| {
            s.records
                .iter()
                .filter(|r| !r.passed())
                .map(move |r| (s.suite.as_str(), r))
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Clone, Debug)]
pub struct ReportBundle {
    pub report: Report,
    pub series: Vec<Series>,
    pub files: Vec<OutputFile>,
}

/// Runs the selected suites. An explicitly named suite that cannot run on
/// the scenario is a contract error; `all` skips such suites with a note.
pub fn run_suite(run: &SuiteRun, suites: &SuiteRegistry, scenarios: &ScenarioRegistry) -> Result<ReportBundle> {
    let selected = suites.select(&run.suite)?;
    let ctx = SuiteContext::new(run.clone(), scenarios)?;
    let explicit = run.suite != "all";
    let mut sections = Vec::new();
    let mut series = Vec::new();
    let mut files = Vec::new();
    for suite in selected {
        if let Some(why) = suite.unsupported(&ctx.scenario) {
            if explicit {
                return invalid(format!("suite '{}' cannot run here: {why}", suite.name()));
            }
            let mut s = Section::new(suite.name());
            s.skipped.push(why);
            sections.push(s);
            continue;
        }
        let mut out = suite.run(&ctx)?;
        for r in &mut out.section.records {
            if let Some(t) = run.tolerances.get(&r.check) {
                *r = r.clone().with_tolerance(*t);
            }
        }
        sections.push(out.section);
        series.extend(out.series);
        files.extend(out.files);
    }
    let checks: usize = sections.iter().map(|s| s.records.len()).sum();
    let passed: usize = sections
        .iter()
        .map(|s| s.records.iter().filter(|r| r.passed()).count())
        .sum();
    let report = Report {
        tool: "csphere".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        run: run.clone(),
        scenario: ctx.scenario.spec.clone(),
        sampling: ctx.sampling.spec(),
        probes: ctx.probes.spec(),
        bounds: ctx.bounds.clone(),
        summary: Summary {
            checks,
            passed,
            failed: checks - passed,
        },
        passed: checks == passed,
        sections,
    };
    Ok(ReportBundle { report, series, files })
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'a str,
    version: &'a str,
    seed: u64,
    unix_time: u64,
    series: Vec<&'a str>,
    files: Vec<&'a str>,
}

/// Writes the bundle into `dir`, creating it if needed. Returns the paths
/// written.
pub fn write_bundle(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: &str| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, contents)?;
        written.push(p);
        Ok(())
    };
    put("report.json", &bundle.report.to_json()?)?;
    let mut series_json = serde_json::to_string_pretty(&bundle.series)?;
    series_json.push('\n');
    put("series.json", &series_json)?;
    for s in &bundle.series {
        let mut csv = Vec::new();
        s.write_csv(&mut csv)?;
        put(&format!("{}.csv", s.name), &String::from_utf8_lossy(&csv))?;
        put(&format!("{}.svg", s.name), &s.to_svg()?)?;
    }
    for f in &bundle.files {
        put(&f.name, &f.contents)?;
    }
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = Metadata {
        tool: &bundle.report.tool,
        version: &bundle.report.version,
        seed: bundle.report.run.seed,
        unix_time,
        series: bundle.series.iter().map(|s| s.name.as_str()).collect(),
        files: bundle.files.iter().map(|f| f.name.as_str()).collect(),
    };
    let mut m = serde_json::to_string_pretty(&meta)?;
    m.push('\n');
    put("metadata.json", &m)?;
    Ok(written)
}

/// Reads the series saved by [`write_bundle`].
pub fn read_series(dir: &Path) -> Result<Vec<Series>> {
    let text = std::fs::read_to_string(dir.join("series.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// One SVG per series of the requested kinds (all kinds when empty).
pub fn emit_plots(series: &[Series], kinds: &[SeriesKind], out: &Path) -> Result<Vec<PathBuf>> {
    let chosen: Vec<&Series> = series
        .iter()
        .filter(|s| kinds.is_empty() || kinds.contains(&s.kind))
        .collect();
    if chosen.is_empty() {
        return Err(Error::Empty("series of the requested kinds"));
    }
    std::fs::create_dir_all(out)?;
    chosen
        .into_iter()
        .map(|s| {
            let p = out.join(format!("{}.svg", s.name));
            std::fs::write(&p, s.to_svg()?)?;
            Ok(p)
        })
        .collect()
}
