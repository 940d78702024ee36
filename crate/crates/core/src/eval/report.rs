use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::wilson_interval;
use super::{AgentEntry, EpisodeSpec, EvalProtocol};
use crate::agents::{run_episode, run_leaps_episode_from, AgentConfig, AgentKind, EpisodeResult, WindowRecord};
use crate::error::{Error, Result};
use crate::model::{BeliefState, SemanticModel};
use crate::world::HouseContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumType {
    All,
    PlanDistance,
    BirthDistance,
}

/// One line of the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub agent: String,
    #[serde(rename = "H")]
    pub horizon: u32,
    pub stratum_type: StratumType,
    pub stratum_value: f64,
    pub n: u64,
    pub successes: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// `(rate_agent - rate_baseline) / rate_baseline` within one stratum; empty
/// when the baseline never succeeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub agent: String,
    pub baseline: String,
    #[serde(rename = "H")]
    pub horizon: u32,
    pub stratum_type: StratumType,
    pub stratum_value: f64,
    pub relative_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub improvements: Vec<Improvement>,
}

impl EvalReport {
    /// Build from rows, deriving improvements for every ordered agent pair.
    pub fn from_rows(rows: Vec<ReportRow>) -> Self {
        let mut agents: Vec<&str> = Vec::new();
        for r in &rows {
            if !agents.contains(&r.agent.as_str()) {
                agents.push(&r.agent);
            }
        }
        let index: BTreeMap<(&str, u32, StratumType, u64), &ReportRow> = rows
            .iter()
            .map(|r| ((r.agent.as_str(), r.horizon, r.stratum_type, r.stratum_value.to_bits()), r))
            .collect();
        let mut improvements = Vec::new();
        for a in &rows {
            for &b in &agents {
                if b == a.agent {
                    continue;
                }
                if let Some(base) = index.get(&(b, a.horizon, a.stratum_type, a.stratum_value.to_bits())) {
                    improvements.push(Improvement {
                        agent: a.agent.clone(),
                        baseline: b.to_string(),
                        horizon: a.horizon,
                        stratum_type: a.stratum_type,
                        stratum_value: a.stratum_value,
                        relative_improvement: (base.rate > 0.0).then(|| (a.rate - base.rate) / base.rate),
                    });
                }
            }
        }
        EvalReport { rows, improvements }
    }

    pub fn row(&self, agent: &str, horizon: u32, stratum_type: StratumType, value: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.agent == agent && r.horizon == horizon && r.stratum_type == stratum_type && r.stratum_value == value)
    }

    pub fn improvement(&self, agent: &str, baseline: &str, horizon: u32, stratum_type: StratumType, value: f64) -> Option<f64> {
        self.improvements
            .iter()
            .find(|i| {
                i.agent == agent
                    && i.baseline == baseline
                    && i.horizon == horizon
                    && i.stratum_type == stratum_type
                    && i.stratum_value == value
            })
            .and_then(|i| i.relative_improvement)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_records(path, &self.rows)
    }

    pub fn write_improvements_csv(&self, path: &Path) -> Result<()> {
        write_records(path, &self.improvements)
    }
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

pub fn read_report_csv(path: &Path) -> Result<EvalReport> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?;
    Ok(EvalReport::from_rows(rows))
}

/// Per-episode outcome kept for aggregation.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    success: bool,
    plan_distance: usize,
    birth_distance: f64,
}

fn agent_config(settings: &AgentConfig, entry: &AgentEntry, horizon: u32) -> AgentConfig {
    AgentConfig {
        kind: entry.kind,
        horizon,
        noise: entry.noise.clone().or_else(|| settings.noise.clone()),
        ..settings.clone()
    }
}

fn house_of<'a>(houses: &'a [HouseContext], spec: &EpisodeSpec) -> Result<&'a HouseContext> {
    houses
        .get(spec.house)
        .ok_or_else(|| Error::InvalidHouse(format!("episode {} references missing house {}", spec.id, spec.house)))
}

fn run_all(
    model: &Arc<SemanticModel>,
    houses: &[HouseContext],
    episodes: &[EpisodeSpec],
    config: &AgentConfig,
) -> Result<Vec<EpisodeResult>> {
    if config.kind == AgentKind::Leaps && config.carry_belief {
        // episodes in one house run in id order and share beliefs
        let mut by_house: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, e) in episodes.iter().enumerate() {
            by_house.entry(e.house).or_default().push(i);
        }
        let groups: Vec<Vec<usize>> = by_house.into_values().collect();
        let done = groups
            .par_iter()
            .map(|idx| {
                let mut belief = BeliefState::new(Arc::clone(model));
                let mut out = Vec::with_capacity(idx.len());
                for &i in idx {
                    let e = &episodes[i];
                    let (r, b) = run_leaps_episode_from(belief, house_of(houses, e)?, e.start, e.goal, config, e.seed)?;
                    belief = b;
                    out.push((i, r));
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut flat: Vec<(usize, EpisodeResult)> = done.into_iter().flatten().collect();
        flat.sort_by_key(|(i, _)| *i);
        return Ok(flat.into_iter().map(|(_, r)| r).collect());
    }
    episodes
        .par_iter()
        .map(|e| run_episode(model, house_of(houses, e)?, e.start, e.goal, config, e.seed))
        .collect()
}

/// Run every agent on every episode at every horizon and aggregate success by
/// stratum. All agents see the same episode specs and seeds.
pub fn evaluate(
    model: &Arc<SemanticModel>,
    houses: &[HouseContext],
    episodes: &[EpisodeSpec],
    protocol: &EvalProtocol,
    settings: &AgentConfig,
) -> Result<EvalReport> {
    protocol.validate()?;
    let mut rows = Vec::new();
    for entry in &protocol.agents {
        for &h in &protocol.horizons {
            let config = agent_config(settings, entry, h);
            config.validate(model.vocab().len())?;
            let outcomes: Vec<Outcome> = run_all(model, houses, episodes, &config)?
                .into_iter()
                .map(|r| Outcome {
                    success: r.success,
                    plan_distance: r.optimal_plan_steps,
                    birth_distance: r.birth_distance,
                })
                .collect();
            rows.extend(aggregate(&entry.name, h, &outcomes, protocol.birth_bin));
        }
    }
    Ok(EvalReport::from_rows(rows))
}

fn aggregate(agent: &str, horizon: u32, outcomes: &[Outcome], bin: f64) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(StratumType, u64), (f64, u64, u64)> = BTreeMap::new();
    let mut add = |t: StratumType, v: f64, success: bool| {
        // non-negative floats order like their bit patterns
        let g = groups.entry((t, v.to_bits())).or_insert((v, 0, 0));
        g.1 += 1;
        g.2 += success as u64;
    };
    for o in outcomes {
        add(StratumType::All, 0.0, o.success);
        add(StratumType::PlanDistance, o.plan_distance as f64, o.success);
        add(StratumType::BirthDistance, (o.birth_distance / bin).floor() * bin, o.success);
    }
    groups
        .into_iter()
        .map(|((stratum_type, _), (stratum_value, n, successes))| {
            let (ci_lo, ci_hi) = wilson_interval(successes, n);
            ReportRow {
                agent: agent.to_string(),
                horizon,
                stratum_type,
                stratum_value,
                n,
                successes,
                rate: successes as f64 / n as f64,
                ci_lo,
                ci_hi,
            }
        })
        .collect()
}

/// One decision window of one episode in the trace stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceLine {
    pub agent: String,
    #[serde(rename = "H")]
    pub horizon: u32,
    pub episode: usize,
    #[serde(flatten)]
    pub window: WindowRecord,
}

/// Rerun the first `limit` episodes for every agent and horizon and write
/// their decision windows as JSON lines.
pub fn write_traces<W: Write>(
    out: &mut W,
    model: &Arc<SemanticModel>,
    houses: &[HouseContext],
    episodes: &[EpisodeSpec],
    protocol: &EvalProtocol,
    settings: &AgentConfig,
    limit: usize,
) -> Result<()> {
    let subset = &episodes[..limit.min(episodes.len())];
    for entry in &protocol.agents {
        for &h in &protocol.horizons {
            let config = agent_config(settings, entry, h);
            for (spec, result) in subset.iter().zip(run_all(model, houses, subset, &config)?) {
                for window in result.trace.windows {
                    let line = TraceLine {
                        agent: entry.name.clone(),
                        horizon: h,
                        episode: spec.id,
                        window,
                    };
                    serde_json::to_writer(&mut *out, &line)?;
                    out.write_all(b"\n").map_err(|e| Error::io(Path::new("<trace>"), e))?;
                }
            }
        }
    }
    Ok(())
}

/// Fixed-width tables of success rate per plan-distance stratum, one per horizon.
pub fn summary_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let mut horizons: Vec<u32> = report.rows.iter().map(|r| r.horizon).collect();
    horizons.sort_unstable();
    horizons.dedup();
    for h in horizons {
        let rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.horizon == h).collect();
        let mut strata: Vec<f64> = rows
            .iter()
            .filter(|r| r.stratum_type == StratumType::PlanDistance)
            .map(|r| r.stratum_value)
            .collect();
        strata.sort_by(f64::total_cmp);
        strata.dedup();
        let mut agents: Vec<&str> = Vec::new();
        for r in &rows {
            if !agents.contains(&r.agent.as_str()) {
                agents.push(&r.agent);
            }
        }
        let _ = writeln!(out, "H = {h}: success rate [95% CI] (n) by plan distance");
        let _ = write!(out, "{:<16}{:>28}", "agent", "all");
        for s in &strata {
            let _ = write!(out, "{:>28}", format!("d={s}"));
        }
        out.push('\n');
        for a in agents {
            let _ = write!(out, "{a:<16}");
            let cell = |t: StratumType, v: f64| -> String {
                rows.iter()
                    .find(|r| r.agent == a && r.stratum_type == t && r.stratum_value == v)
                    .map(|r| format!("{:.3} [{:.3},{:.3}] ({})", r.rate, r.ci_lo, r.ci_hi, r.n))
                    .unwrap_or_else(|| "-".into())
            };
            let _ = write!(out, "{:>28}", cell(StratumType::All, 0.0));
            for &s in &strata {
                let _ = write!(out, "{:>28}", cell(StratumType::PlanDistance, s));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct PlotPoint<'a> {
    agent: &'a str,
    #[serde(rename = "H")]
    horizon: u32,
    x: f64,
    success_rate: f64,
    ci_lo: f64,
    ci_hi: f64,
}

#[derive(Serialize)]
struct ImprovementPoint<'a> {
    agent: &'a str,
    baseline: &'a str,
    #[serde(rename = "H")]
    horizon: u32,
    x: f64,
    relative_improvement: Option<f64>,
}

/// Plot-ready CSVs: success rate against plan distance and birth distance,
/// and relative improvement against plan distance.
pub fn write_plot_csvs(report: &EvalReport, dir: &Path) -> Result<()> {
    for (t, name) in [
        (StratumType::PlanDistance, "plot_plan_distance.csv"),
        (StratumType::BirthDistance, "plot_birth_distance.csv"),
    ] {
        let points: Vec<PlotPoint> = report
            .rows
            .iter()
            .filter(|r| r.stratum_type == t)
            .map(|r| PlotPoint {
                agent: &r.agent,
                horizon: r.horizon,
                x: r.stratum_value,
                success_rate: r.rate,
                ci_lo: r.ci_lo,
                ci_hi: r.ci_hi,
            })
            .collect();
        write_records(&dir.join(name), &points)?;
    }
    let points: Vec<ImprovementPoint> = report
        .improvements
        .iter()
        .filter(|i| i.stratum_type == StratumType::PlanDistance)
        .map(|i| ImprovementPoint {
            agent: &i.agent,
            baseline: &i.baseline,
            horizon: i.horizon,
            x: i.stratum_value,
            relative_improvement: i.relative_improvement,
        })
        .collect();
    write_records(&dir.join("plot_relative_improvement.csv"), &points)
}

/// Most and least likely neighbors of one room-graph signal under the prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorRow {
    pub signal: String,
    pub top: Vec<(String, f64)>,
    pub bottom: Vec<(String, f64)>,
}

/// For each room type and the none-signal, the three most and three least
/// likely neighbors by prior (ties by signal index). `bottom` lists the least
/// likely first.
pub fn report_prior(model: &SemanticModel) -> Vec<PriorRow> {
    let vocab = model.vocab();
    let n = vocab.room_nodes();
    (0..n)
        .map(|i| {
            let mut ranked: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, model.prior(i, j))).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let named = |(j, p): &(usize, f64)| (vocab.name(*j).unwrap_or("?").to_string(), *p);
            PriorRow {
                signal: vocab.name(i).unwrap_or("?").to_string(),
                top: ranked.iter().take(3).map(named).collect(),
                bottom: ranked.iter().rev().take(3).map(named).collect(),
            }
        })
        .collect()
}

impl PriorRow {
    pub fn table(rows: &[PriorRow]) -> String {
        let mut out = String::new();
        let fmt = |v: &[(String, f64)]| v.iter().map(|(s, p)| format!("{s} {p:.2}")).collect::<Vec<_>>().join(", ");
        let _ = writeln!(out, "{:<14}{:<52}least likely neighbors", "signal", "most likely neighbors");
        for r in rows {
            let _ = writeln!(out, "{:<14}{:<52}{}", r.signal, fmt(&r.top), fmt(&r.bottom));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SignalVocabulary;

    #[test]
    fn all_success_has_unit_upper_bound() {
        let o = vec![
            Outcome {
                success: true,
                plan_distance: 2,
                birth_distance: 7.5
            };
            12
        ];
        let rows = aggregate("a", 300, &o, 5.0);
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.rate == 1.0 && r.ci_hi == 1.0 && r.n == 12));
        assert_eq!(rows[2].stratum_value, 5.0);
    }

    #[test]
    fn improvements_pair_matching_strata() {
        let row = |agent: &str, rate: f64| ReportRow {
            agent: agent.into(),
            horizon: 300,
            stratum_type: StratumType::PlanDistance,
            stratum_value: 2.0,
            n: 10,
            successes: (rate * 10.0) as u64,
            rate,
            ci_lo: 0.0,
            ci_hi: 1.0,
        };
        let r = EvalReport::from_rows(vec![row("a", 0.6), row("b", 0.4), row("c", 0.0)]);
        let imp = r.improvement("a", "b", 300, StratumType::PlanDistance, 2.0).unwrap();
        assert!((imp - 0.5).abs() < 1e-12);
        assert_eq!(r.improvement("a", "c", 300, StratumType::PlanDistance, 2.0), None);
        assert_eq!(r.improvements.len(), 6);
    }

    #[test]
    fn prior_table_has_a_row_per_room_node() {
        let m = SemanticModel::uniform(SignalVocabulary::roomnav(), 0.5, 0.001, 0.15).unwrap();
        let rows = report_prior(&m);
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.top.len() == 3 && r.bottom.len() == 3));
        assert_eq!(PriorRow::table(&rows).lines().count(), 10);
    }
}
