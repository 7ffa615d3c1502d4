use std::path::Path;
use std::time::Instant;

use hetnas::cimsim::{
    macro_area_report, naive_reads, reduction_ratio, row_closed_form, total_area, unique_reads,
    AreaModel, DedupConfig, Layout,
};
use hetnas::costmodel::{
    fit_curve, load_hw, read_calibration_csv, FitReport, HardwareConfig, SAMPLE_HW_JSON,
};
use hetnas::netir::{
    default_space, largest_subnet, materialize, sample_random, smallest_subnet, Network,
    SearchSpace, SubnetChoice,
};
use hetnas::scheduler::{npu_only_report, schedule_network, write_layer_csv, Objective};
use hetnas::search::{
    block_mix_report, evolve, write_mix_csv, AccuracySurrogate, Constraint, EvolutionParams,
    LookupTable, SearchObjective, Synthetic,
};
use serde_json::json;

use crate::args::{
    CalibrateArgs, Command, CostObjective, EstimateArgs, Extreme, FrontObjective, HwArgs,
    SearchArgs, SimulateCimArgs, SpaceArgs, SurrogateKind,
};
use crate::error::Failure;
use crate::manifest::{load_manifest, sha256_hex, RunManifest, Session};

const BUILTIN_SPACE: &str = "default_space";
const BUILTIN_HW: &str = "sample_hw";

fn builtin_text(name: &str) -> Option<String> {
    match name {
        BUILTIN_SPACE => Some(default_space().to_json()),
        BUILTIN_HW => Some(SAMPLE_HW_JSON.to_string()),
        _ => None,
    }
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load_space(s: &mut Session, path: Option<&Path>) -> Result<SearchSpace, Failure> {
    let text = match path {
        Some(p) => s.read_input(p)?,
        None => s.builtin_input(BUILTIN_SPACE, &default_space().to_json()),
    };
    let space = SearchSpace::from_json(&text)?;
    space.validate()?;
    Ok(space)
}

fn load_hardware(s: &mut Session, args: &HwArgs) -> Result<HardwareConfig, Failure> {
    let text = match &args.hw {
        Some(p) => s.read_input(p)?,
        None => s.builtin_input(BUILTIN_HW, SAMPLE_HW_JSON),
    };
    let mut hw = load_hw(&text)?;
    if let Some(n) = args.macros {
        hw = hw.with_macros(n);
    }
    if let Some(c) = args.cus {
        if c == 0 {
            return Err(Failure::invalid("--cus must be positive"));
        }
        hw = hw.with_cus(c);
    }
    Ok(hw)
}

fn parse_pair(text: &str, what: &str) -> Result<(u32, u32), Failure> {
    let bad = || Failure::parse(format!("bad {what} `{text}` (expected N or NxM)"));
    match text.split_once('x') {
        Some((a, b)) => Ok((
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        )),
        None => {
            let n = text.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

fn estimate(s: &mut Session, a: &EstimateArgs) -> Result<(), Failure> {
    let hw = load_hardware(s, &a.hw)?;
    let (network, choice): (Network, Option<SubnetChoice>) = match (&a.network, &a.choice) {
        (Some(p), _) => {
            let net = Network::from_json(&s.read_input(p)?)?;
            net.check()?;
            (net, None)
        }
        (None, Some(c)) => {
            let space = load_space(s, a.space.as_deref())?;
            let choice = match c.as_str() {
                "@smallest" => smallest_subnet(&space),
                "@largest" => largest_subnet(&space),
                path => SubnetChoice::from_text(&s.read_input(Path::new(path))?)?,
            };
            (materialize(&space, &choice)?, Some(choice))
        }
        (None, None) => return Err(Failure::parse("one of --choice or --network is required")),
    };
    let objective = match a.objective {
        CostObjective::Latency => Objective::Latency,
        CostObjective::Energy => Objective::Energy,
    };
    let (schedule, report) = schedule_network(&network, &hw, objective)?;
    let baseline = npu_only_report(&network, &hw)?;
    let speedup = baseline.total_latency / report.total_latency;
    let latency_reduction = 1.0 - report.total_latency / baseline.total_latency;
    let energy_saving = 1.0 - report.total_energy / baseline.total_energy;
    let doc = json!({
        "objective": objective,
        "choice": choice,
        "layers": network.layers.len(),
        "macs": network.total_macs(),
        "params": network.total_params(),
        "schedule_digest": schedule.digest(),
        "schedule": schedule,
        "report": report,
        "baseline": {
            "npu_only_latency_s": baseline.total_latency,
            "npu_only_energy_nj": baseline.total_energy,
            "speedup": speedup,
            "latency_reduction": latency_reduction,
            "energy_saving": energy_saving,
        },
    });
    s.emit("report.json", pretty(&doc));
    s.emit("layers.csv", write_layer_csv(&report));
    s.emit("baseline_layers.csv", write_layer_csv(&baseline));
    s.say(format!("latency_s {}", report.total_latency));
    s.say(format!("energy_nj {}", report.total_energy));
    s.say(format!("npu_only_latency_s {}", baseline.total_latency));
    s.say(format!("npu_only_energy_nj {}", baseline.total_energy));
    s.say(format!("speedup {speedup}"));
    s.say(format!("energy_saving {energy_saving}"));
    Ok(())
}

fn search(s: &mut Session, a: &SearchArgs, seed: u64) -> Result<(), Failure> {
    let space = load_space(s, a.space.as_deref())?;
    let hw = load_hardware(s, &a.hw)?;
    let surrogate: Box<dyn AccuracySurrogate> = match a.surrogate {
        SurrogateKind::Synthetic => {
            if !(a.macs_scale.is_finite() && a.macs_scale > 0.0) {
                return Err(Failure::invalid("--macs-scale must be positive"));
            }
            Box::new(Synthetic::new(a.macs_scale))
        }
        SurrogateKind::Lookup => {
            let path = a.accuracy_csv.as_ref().ok_or_else(|| {
                Failure::parse("--accuracy-csv is required with --surrogate lookup")
            })?;
            Box::new(LookupTable::from_csv(s.read_input(path)?.as_bytes())?)
        }
    };
    let objective = match a.objective {
        FrontObjective::Latency => SearchObjective::Latency,
        FrontObjective::Energy => SearchObjective::Energy,
        FrontObjective::Joint => SearchObjective::Joint,
    };
    let constraint = match (a.max_latency, a.max_energy) {
        (Some(t), _) => Constraint::MaxLatency(t),
        (None, Some(e)) => Constraint::MaxEnergy(e),
        (None, None) => Constraint::None,
    };
    let params = EvolutionParams {
        population: a.population,
        generations: a.generations,
        mutation_rate: a.mutation_rate,
        crossover_rate: a.crossover_rate,
        objective,
        constraint,
        seed,
        cache_capacity: a.cache_capacity,
    };
    let front = evolve(&space, &hw, surrogate.as_ref(), &params)?;
    let mix = block_mix_report(&front, &space)?;
    s.emit("front.csv", front.to_csv());
    s.emit("front.json", format!("{}\n", front.to_json()));
    s.emit("block_mix.csv", write_mix_csv(&mix));
    s.say(format!("surrogate {}", surrogate.name()));
    s.say(format!("front_points {}", front.points.len()));
    if let (Some(first), Some(last)) = (front.points.first(), front.points.last()) {
        s.say(format!(
            "cost_range {} {}",
            first.eval.cost(objective),
            last.eval.cost(objective)
        ));
        s.say(format!("best_accuracy {}", last.eval.accuracy));
    }
    Ok(())
}

fn simulate_cim(s: &mut Session, a: &SimulateCimArgs) -> Result<(), Failure> {
    let kernel = parse_pair(&a.kernel, "kernel")?;
    let layout: Layout = a.layout.parse().map_err(Failure::parse)?;
    let one_group = a.input.is_none();
    let input = match &a.input {
        Some(t) => parse_pair(t, "input")?,
        None => DedupConfig::one_group_input(kernel, a.stride, layout, a.cu),
    };
    let cfg = DedupConfig {
        kernel,
        stride: a.stride,
        input,
        cu_count: a.cu,
        layout,
    };
    cfg.validate()?;
    let (naive, unique, reduction) = (
        naive_reads(&cfg)?,
        unique_reads(&cfg)?,
        reduction_ratio(&cfg)?,
    );
    let closed =
        (one_group && layout == Layout::Row).then(|| row_closed_form(kernel, a.stride, a.cu));
    let model = AreaModel::default();
    let (memory_mm2, periph_mm2) = macro_area_report(&model);
    let doc = json!({
        "config": cfg,
        "output": cfg.output(),
        "naive_reads": naive,
        "unique_reads": unique,
        "reduction": reduction,
        "closed_form": closed,
        "closed_form_matches": closed.map(|c| c == reduction),
        "relative_area": total_area(a.cu, &model),
        "macro_memory_mm2": memory_mm2,
        "macro_periph_mm2": periph_mm2,
    });
    s.emit("dedup.json", pretty(&doc));
    s.say(format!("naive {naive}"));
    s.say(format!("unique {unique}"));
    s.say(format!("reduction {reduction}"));
    if let Some(c) = closed {
        s.say(format!(
            "closed_form {c} {}",
            if c == reduction { "match" } else { "MISMATCH" }
        ));
    }
    if let Some(n_max) = a.sweep {
        if n_max == 0 {
            return Err(Failure::invalid("--sweep must be at least 1"));
        }
        let mut csv = String::from("n_cu,naive,unique,reduction,closed_form,relative_area\n");
        for n in 1..=n_max {
            let cfg = DedupConfig {
                kernel,
                stride: a.stride,
                input: if one_group {
                    DedupConfig::one_group_input(kernel, a.stride, Layout::Row, n)
                } else {
                    input
                },
                cu_count: n,
                layout: Layout::Row,
            };
            cfg.validate()?;
            let closed = if one_group {
                row_closed_form(kernel, a.stride, n).to_string()
            } else {
                String::new()
            };
            csv.push_str(&format!(
                "{n},{},{},{},{closed},{}\n",
                naive_reads(&cfg)?,
                unique_reads(&cfg)?,
                reduction_ratio(&cfg)?,
                total_area(n, &model)
            ));
        }
        s.emit("sweep.csv", csv);
    }
    Ok(())
}

fn space(s: &mut Session, a: &SpaceArgs, seed: u64) -> Result<(), Failure> {
    let space = load_space(s, a.space.as_deref())?;
    let cardinality = space.cardinality().to_string();
    let summary = json!({
        "cardinality": cardinality,
        "blocks": space.blocks.iter().map(|b| &b.name).collect::<Vec<_>>(),
        "resolutions": space.resolutions,
    });
    s.emit("summary.json", pretty(&summary));
    s.emit("space.json", format!("{}\n", space.to_json()));
    if a.cardinality {
        s.say(&cardinality);
    }
    if let Some(kind) = a.emit {
        let choices: Vec<SubnetChoice> = match kind {
            Extreme::Smallest => vec![smallest_subnet(&space)],
            Extreme::Largest => vec![largest_subnet(&space)],
            Extreme::Random => (0..a.count as u64)
                .map(|i| sample_random(&space, seed.wrapping_add(i)))
                .collect(),
        };
        for c in &choices {
            s.say(c.key());
        }
        s.emit("choices.json", pretty(&choices));
    }
    Ok(())
}

fn calibrate(s: &mut Session, a: &CalibrateArgs) -> Result<(), Failure> {
    let samples = read_calibration_csv(s.read_input(&a.samples)?.as_bytes())?;
    let fit = fit_curve(&samples)?;
    s.emit(
        "fit.json",
        pretty(&json!({ "samples": samples.len(), "fit": fit })),
    );
    s.say(format!("peak {}", fit.curve.peak));
    s.say(format!("half_point {}", fit.curve.half_point));
    s.say(format!(
        "rms_relative_residual {}",
        fit.rms_relative_residual
    ));
    if fit.flagged {
        eprintln!(
            "warning: rms relative residual {} exceeds {}; the samples do not follow a saturating curve",
            fit.rms_relative_residual,
            FitReport::RESIDUAL_THRESHOLD
        );
    }
    Ok(())
}

/// Runs one verb and commits its outputs and manifest to `dir`.
pub fn execute(command: &Command, seed: u64, dir: &Path) -> Result<RunManifest, Failure> {
    let start = Instant::now();
    let mut s = Session::default();
    match command {
        Command::Estimate(a) => estimate(&mut s, a)?,
        Command::Search(a) => search(&mut s, a, seed)?,
        Command::SimulateCim(a) => simulate_cim(&mut s, a)?,
        Command::Space(a) => space(&mut s, a, seed)?,
        Command::Calibrate(a) => calibrate(&mut s, a)?,
        Command::Replay(a) => return replay(&a.manifest, dir),
    }
    let stdout = std::mem::take(&mut s.stdout);
    let manifest = s.commit(
        dir,
        command.verb(),
        seed,
        command.clone(),
        start.elapsed().as_secs_f64(),
    )?;
    print!("{stdout}");
    Ok(manifest)
}

/// Checks the recorded inputs, reruns the recorded command into `dir` and
/// compares the output digests.
pub fn replay(path: &Path, dir: &Path) -> Result<RunManifest, Failure> {
    let recorded = load_manifest(path)?;
    if matches!(recorded.command, Command::Replay(_)) {
        return Err(Failure::invalid("a manifest cannot record a replay"));
    }
    for (name, digest) in &recorded.inputs {
        let actual = match name.strip_prefix("builtin:") {
            Some(b) => builtin_text(b)
                .map(|t| sha256_hex(t.as_bytes()))
                .ok_or_else(|| Failure::invalid(format!("unknown builtin input `{b}`")))?,
            None => sha256_hex(
                &std::fs::read(name)
                    .map_err(|e| Failure::io(format!("cannot read {name}: {e}")))?,
            ),
        };
        if &actual != digest {
            return Err(Failure::invalid(format!(
                "input {name} changed since the recorded run"
            )));
        }
    }
    let fresh = execute(&recorded.command, recorded.seed, dir)?;
    if fresh.outputs != recorded.outputs {
        let diverged: Vec<&str> = recorded
            .outputs
            .iter()
            .filter(|(k, v)| fresh.outputs.get(*k) != Some(*v))
            .map(|(k, _)| k.as_str())
            .collect();
        return Err(Failure::invalid(format!(
            "replay diverged in {}",
            diverged.join(", ")
        )));
    }
    Ok(fresh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::ReplayArgs;
    use crate::manifest::MANIFEST_FILE;

    #[test]
    fn pairs_accept_square_and_rectangular_forms() {
        assert_eq!(parse_pair("3", "kernel").unwrap(), (3, 3));
        assert_eq!(parse_pair("3x5", "kernel").unwrap(), (3, 5));
        assert_eq!(
            parse_pair("3y3", "kernel").unwrap_err().code,
            crate::error::EXIT_PARSE
        );
        assert!(parse_pair("x", "input").is_err());
    }

    #[test]
    fn failing_verbs_touch_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        let cmd = Command::SimulateCim(SimulateCimArgs {
            kernel: "3".into(),
            stride: 1,
            input: None,
            cu: 0,
            layout: "row".into(),
            sweep: None,
        });
        assert_eq!(
            execute(&cmd, 0, &dir).unwrap_err().code,
            crate::error::EXIT_VALIDATION
        );
        assert!(!dir.exists());
    }

    #[test]
    fn replay_of_a_replay_is_refused() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = Session::default();
        s.emit("x", "y");
        let cmd = Command::Replay(ReplayArgs {
            manifest: "m.json".into(),
        });
        s.commit(tmp.path(), "replay", 0, cmd, 0.0).unwrap();
        let err = replay(&tmp.path().join(MANIFEST_FILE), &tmp.path().join("again")).unwrap_err();
        assert_eq!(err.code, crate::error::EXIT_VALIDATION);
    }
}
