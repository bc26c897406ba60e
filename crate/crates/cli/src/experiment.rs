//! Multi-seed experiment runs and their aggregation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hoc_core::rng::ENV_STREAM;
use hoc_core::HocRng;
use hoc_learn::{EpisodeLog, Learner};
use rayon::prelude::*;

use crate::config::{ExperimentSpec, Metric};

/// One seed's episode logs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub episodes: Vec<EpisodeLog>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    /// Episodes completed at this checkpoint.
    pub episode: usize,
    pub mean: f64,
    /// Sample standard deviation across runs; 0 for a single run.
    pub std: f64,
}

/// Learning curve and switch statistics aggregated over all runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub metric: Metric,
    pub runs: usize,
    pub checkpoints: Vec<Checkpoint>,
    /// Mean of the metric over the last window, averaged over runs.
    pub final_performance: f64,
    /// Option switches per environment step, for each option level.
    pub switch_frequency: Vec<f64>,
    /// Per-run window means, `[run][checkpoint]`.
    pub per_run: Vec<Vec<f64>>,
}

impl RunSummary {
    /// Average number of steps between switches at each level (infinite if none happened).
    pub fn steps_per_switch(&self) -> Vec<f64> {
        self.switch_frequency.iter().map(|f| 1.0 / f).collect()
    }

    /// First checkpoint episode at which each run's window mean reaches `threshold`.
    pub fn episodes_to_reach(&self, threshold: f64) -> Vec<Option<usize>> {
        self.per_run
            .iter()
            .map(|row| {
                row.iter()
                    .position(|&m| m >= threshold)
                    .map(|k| self.checkpoints[k].episode)
            })
            .collect()
    }
}

fn metric_value(metric: Metric, log: &EpisodeLog) -> f64 {
    match metric {
        Metric::Steps => log.steps as f64,
        Metric::Reward => log.total_reward,
    }
}

/// Trains one fresh learner for `spec.episodes` episodes.
pub fn run_single(spec: &ExperimentSpec, seed: u64) -> Result<RunResult> {
    let mut learner = Learner::new(spec.agent.clone(), seed)?;
    let mut env = spec.env.build();
    let mut env_rng = HocRng::new(seed, ENV_STREAM);
    let mut episodes = Vec::with_capacity(spec.episodes);
    for k in 0..spec.episodes {
        let log = learner
            .run_episode(env.as_mut(), &mut env_rng, spec.step_cap)
            .with_context(|| format!("seed {seed}, episode {}", k + 1))?;
        episodes.push(log);
    }
    Ok(RunResult { seed, episodes })
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Aggregates finished runs into windowed checkpoints.
pub fn summarize(spec: &ExperimentSpec, runs: &[RunResult]) -> Result<RunSummary> {
    if runs.is_empty() {
        bail!("no runs to summarize");
    }
    let w = spec.report_window;
    let metric = spec.env.metric();
    let per_run: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| {
            r.episodes
                .chunks_exact(w)
                .map(|c| c.iter().map(|l| metric_value(metric, l)).sum::<f64>() / w as f64)
                .collect()
        })
        .collect();
    let count = per_run[0].len();
    if count == 0 || per_run.iter().any(|r| r.len() != count) {
        bail!("runs do not cover a whole reporting window");
    }
    let checkpoints: Vec<Checkpoint> = (0..count)
        .map(|k| {
            let col: Vec<f64> = per_run.iter().map(|r| r[k]).collect();
            let (mean, std) = mean_std(&col);
            Checkpoint {
                episode: (k + 1) * w,
                mean,
                std,
            }
        })
        .collect();
    let levels = spec.depth() - 1;
    let mut switches = vec![0usize; levels];
    let mut steps = 0usize;
    for log in runs.iter().flat_map(|r| &r.episodes) {
        steps += log.steps;
        switches.iter_mut().zip(&log.switches).for_each(|(a, b)| *a += b);
    }
    Ok(RunSummary {
        label: spec.label.clone(),
        metric,
        runs: runs.len(),
        final_performance: checkpoints[count - 1].mean,
        checkpoints,
        switch_frequency: switches.iter().map(|&s| s as f64 / steps.max(1) as f64).collect(),
        per_run,
    })
}

/// Runs every seed and aggregates, without touching the file system.
///
/// `threads` of 0 or 1 runs sequentially; results never depend on it.
pub fn run_all(spec: &ExperimentSpec, threads: usize) -> Result<(Vec<RunResult>, RunSummary)> {
    let seeds: Vec<u64> = (0..spec.num_runs as u64).map(|i| spec.base_seed + i).collect();
    let runs: Vec<RunResult> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        pool.install(|| seeds.par_iter().map(|&s| run_single(spec, s)).collect::<Result<_>>())?
    } else {
        seeds.iter().map(|&s| run_single(spec, s)).collect::<Result<_>>()?
    };
    let summary = summarize(spec, &runs)?;
    Ok((runs, summary))
}

/// Runs the experiment and writes per-run and aggregate CSVs into `spec.output_dir`.
///
/// Files are written to a temporary name and renamed into place. If anything
/// fails, files created by this call are removed.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<RunSummary> {
    let (runs, summary) = run_all(spec, threads)?;
    let mut writer = AtomicDir::new(&spec.output_dir)?;
    let result = (|| -> Result<()> {
        for run in &runs {
            writer.write(&format!("run_{}.csv", run.seed), &run_csv(run, spec.depth())?)?;
        }
        writer.write("summary.csv", &summary_csv(&summary)?)?;
        writer.write("switches.csv", &switches_csv(&summary)?)?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            writer.commit();
            Ok(summary)
        }
        Err(e) => Err(e),
    }
}

fn run_csv(run: &RunResult, depth: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["episode".to_string(), "steps".into(), "reward".into(), "truncated".into()];
    header.extend((1..depth).map(|j| format!("switches_l{j}")));
    w.write_record(&header)?;
    for (k, log) in run.episodes.iter().enumerate() {
        let mut row = vec![
            (k + 1).to_string(),
            log.steps.to_string(),
            log.total_reward.to_string(),
            log.truncated.to_string(),
        ];
        row.extend(log.switches.iter().map(|s| s.to_string()));
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

/// The aggregate learning curve as CSV: `checkpoint,episode,mean,std`.
pub fn summary_csv(summary: &RunSummary) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["checkpoint", "episode", "mean", "std"])?;
    for (k, c) in summary.checkpoints.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            c.episode.to_string(),
            c.mean.to_string(),
            c.std.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

fn switches_csv(summary: &RunSummary) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "switches_per_step", "steps_per_switch"])?;
    for (j, f) in summary.switch_frequency.iter().enumerate() {
        w.write_record([(j + 1).to_string(), f.to_string(), (1.0 / f).to_string()])?;
    }
    Ok(w.into_inner()?)
}

/// Reads a learning curve written by [`summary_csv`].
pub fn read_summary_csv(path: &Path, label: &str, metric: Metric) -> Result<RunSummary> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut checkpoints = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |n: usize| -> Result<&str> {
            rec.get(n)
                .with_context(|| format!("{}: row {} has too few columns", path.display(), i + 2))
        };
        let parse = |n: usize| -> Result<f64> {
            field(n)?
                .parse()
                .with_context(|| format!("{}: row {} column {} is not a number", path.display(), i + 2, n + 1))
        };
        checkpoints.push(Checkpoint {
            episode: parse(1)? as usize,
            mean: parse(2)?,
            std: parse(3)?,
        });
    }
    let final_performance = checkpoints.last().map_or(f64::NAN, |c| c.mean);
    Ok(RunSummary {
        label: label.to_string(),
        metric,
        runs: 0,
        checkpoints,
        final_performance,
        switch_frequency: Vec::new(),
        per_run: Vec::new(),
    })
}

/// Writes files into a directory via temp-and-rename, removing them unless committed.
pub(crate) struct AtomicDir {
    dir: PathBuf,
    created: Vec<PathBuf>,
    committed: bool,
}

impl AtomicDir {
    pub(crate) fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(AtomicDir {
            dir: dir.to_path_buf(),
            created: Vec::new(),
            committed: false,
        })
    }

    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.created.push(path.clone());
        Ok(path)
    }

    pub(crate) fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for AtomicDir {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.created {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let attempt = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = attempt {
        let _ = fs::remove_file(&tmp);
        return Err(e).with_context(|| format!("cannot write {}", path.display()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EnvKind;

    fn log(steps: usize, reward: f64, switches: Vec<usize>) -> EpisodeLog {
        EpisodeLog {
            total_reward: reward,
            steps,
            terminations: switches.clone(),
            switches,
            truncated: false,
        }
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn windows_and_switch_rates() {
        let mut spec = ExperimentSpec::new(EnvKind::FourRooms, 2);
        spec.report_window = 2;
        spec.episodes = 4;
        let a = RunResult {
            seed: 0,
            episodes: vec![log(10, 1.0, vec![1]), log(20, 1.0, vec![0]), log(4, 1.0, vec![2]), log(6, 1.0, vec![0])],
        };
        let b = RunResult {
            seed: 1,
            episodes: vec![log(30, 1.0, vec![3]), log(30, 1.0, vec![0]), log(8, 1.0, vec![0]), log(8, 1.0, vec![2])],
        };
        let s = summarize(&spec, &[a, b]).unwrap();
        assert_eq!(s.per_run, vec![vec![15.0, 5.0], vec![30.0, 8.0]]);
        assert_eq!(s.checkpoints[0].episode, 2);
        assert_eq!(s.checkpoints[1].mean, 6.5);
        assert!((s.checkpoints[1].std - (4.5f64).sqrt()).abs() < 1e-12);
        assert_eq!(s.final_performance, 6.5);
        assert!((s.switch_frequency[0] - 8.0 / 116.0).abs() < 1e-15);
        assert_eq!(s.episodes_to_reach(8.0), vec![Some(2), Some(2)]);
        assert_eq!(s.episodes_to_reach(20.0), vec![None, Some(2)]);
    }

    #[test]
    fn uncommitted_files_are_removed() {
        let dir = std::env::temp_dir().join(format!("hoc-atomic-{}", std::process::id()));
        {
            let mut w = AtomicDir::new(&dir).unwrap();
            w.write("a.csv", b"x").unwrap();
            assert!(dir.join("a.csv").exists());
        }
        assert!(!dir.join("a.csv").exists());
        assert!(!dir.join("a.csv.tmp").exists());
        let mut w = AtomicDir::new(&dir).unwrap();
        w.write("b.csv", b"y").unwrap();
        w.commit();
        assert_eq!(fs::read(dir.join("b.csv")).unwrap(), b"y");
        fs::remove_dir_all(&dir).unwrap();
    }
}
