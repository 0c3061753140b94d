//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use matchbox_core::entropy::entropy_profile;
use matchbox_core::fusion::{entropy_dominance, fuse, fused_minimality, FusionSpec, Gluing};
use matchbox_core::geometry::{box_dimension_estimate, describe_witness, doubling_check, DoublingVerdict};
use matchbox_core::pseudogroup::{add_mixed_radix, lipschitz_audit, minimality_check, odometer_with_steps, Pseudogroup};
use matchbox_core::rational::{q, Q};
use matchbox_core::solenoid::{
    bounded_tower_equivalent, check_isometry, displacement, tower_equivalent_1d, Answer, DisplacementValue, Presentation1D,
    Verdict,
};
use matchbox_core::spec::PseudogroupSpec;
use matchbox_core::treespace::{covering_counts, enumerate_points, exact_profile, TreeSample};
use matchbox_core::{CylinderSet, LevelSpace, Metric, MetricSpace, WeightedMetric};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: u64) -> Result<Duration, String> {
    let e = t.elapsed();
    check(e <= Duration::from_secs(limit), format!("took {e:.1?}, limit {limit}s"))?;
    Ok(e)
}

fn periodic(period: &[u64]) -> Presentation1D {
    Presentation1D::periodic(vec![], period.to_vec()).unwrap()
}

fn odometer(degrees: &[u32], steps: &[i64], base: u32) -> Pseudogroup {
    odometer_with_steps(degrees, steps, WeightedMetric::power(base).unwrap()).unwrap()
}

fn spec(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name).to_str().unwrap().to_string()
}

fn matchbox(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_matchbox")).args(args).env_remove("MATCHBOX_CACHE_DIR").output().unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn ac1() -> Outcome {
    let t = Instant::now();
    let c = bounded_tower_equivalent(&periodic(&[2, 3]), &Presentation1D::gap_two_exp(), 64).map_err(|e| e.to_string())?;
    check(c.tower.verdict == Verdict::Equivalent, "not tower equivalent")?;
    let d = c.displacement.as_ref().ok_or("no displacement")?;
    check(d.value == DisplacementValue::UnboundedTrend, format!("displacement {:?}", d.value))?;
    check(d.increasing_windows >= 3, format!("{} increasing windows", d.increasing_windows))?;
    check(c.homeomorphic == Answer::Yes && c.lipschitz == Answer::No && c.exact, c.summary())?;
    let e = within(t, 5)?;
    Ok(format!("{} (exact), running sup increased in {} windows, {e:.1?}", c.summary(), d.increasing_windows))
}

fn ac2() -> Outcome {
    let t = Instant::now();
    let c = bounded_tower_equivalent(&periodic(&[2, 3]), &periodic(&[3, 2]), 64).map_err(|e| e.to_string())?;
    check(c.summary() == "homeomorphic=yes lipschitz=yes D=1" && c.exact, c.summary())?;
    let e = within(t, 5)?;
    Ok(format!("{} (exact), {e:.1?}", c.summary()))
}

fn ac3() -> Outcome {
    let t = Instant::now();
    let a = tower_equivalent_1d(&periodic(&[2]), &periodic(&[2, 3]), 64).map_err(|e| e.to_string())?;
    check(a.verdict == Verdict::NotEquivalent && a.exact, format!("(2) vs (2,3): {}", a.label))?;
    let b = tower_equivalent_1d(&periodic(&[2]), &periodic(&[4]), 64).map_err(|e| e.to_string())?;
    check(b.verdict == Verdict::Equivalent && b.exact, format!("(2) vs (4): {}", b.label))?;
    let ix = b.indexing.ok_or("no indexing")?;
    for (i, nu) in ix.nu.iter().enumerate() {
        let l = i as u64 + 1;
        check(*nu == Some(l.div_ceil(2)), format!("nu_{l} = {nu:?}"))?;
    }
    let d = displacement(&periodic(&[2]), &periodic(&[4]), 64).map_err(|e| e.to_string())?;
    check(d.value == DisplacementValue::UnboundedTrend, format!("(2) vs (4) displacement {:?}", d.value))?;
    let e = within(t, 5)?;
    Ok(format!("(2) vs (2,3) not equivalent; (2) vs (4) equivalent, nu = ceil(l/2), unbounded; {e:.1?}"))
}

/// Every word of length <= alpha acts by a translation; tabulate the distinct
/// permutations from the generators and compare all distances directly.
fn direct_isometry(g: &Pseudogroup, degrees: &[u32], steps: &[i64], alpha: usize) -> Result<usize, String> {
    let pts = g.ms.space.words(g.depth).map_err(|e| e.to_string())?;
    let mut shifts = BTreeSet::from([0i64]);
    for _ in 0..alpha {
        let next: Vec<i64> = shifts.iter().flat_map(|&s| steps.iter().flat_map(move |&t| [s + t, s - t])).collect();
        shifts.extend(next);
    }
    let perms: BTreeSet<Vec<Vec<u32>>> =
        shifts.iter().map(|&s| pts.iter().map(|w| add_mixed_radix(w, degrees, s)).collect()).collect();
    for perm in &perms {
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if g.ms.distance_words(&pts[i], &pts[j]) != g.ms.distance_words(&perm[i], &perm[j]) {
                    return Err(format!("{:?} {:?} moved to {:?} {:?}", pts[i], pts[j], perm[i], perm[j]));
                }
            }
        }
    }
    Ok(perms.len())
}

fn ac4() -> Outcome {
    let t = Instant::now();
    let eps = [q(1, 2), q(1, 6), q(1, 18)];
    let mut maps = 0;
    for (steps, base) in [(vec![1], 3), (vec![1], 2), (vec![1, 3], 3), (vec![1, 3], 2)] {
        for depth in 1..=8 {
            let degrees = vec![2; depth];
            let g = odometer(&degrees, &steps, base);
            let r = check_isometry(&g, 6).map_err(|e| e.to_string())?;
            check(r.passed(), format!("steps {steps:?} base {base} depth {depth}: {:?}", r.witness))?;
            maps += direct_isometry(&g, &degrees, &steps, 6)?;
        }
        let g = odometer(&[2; 8], &steps, base);
        let p = entropy_profile(&g, &eps, 0..=10, 8).map_err(|e| e.to_string())?;
        check(p.all_flat(), format!("steps {steps:?} base {base}: slopes {:?}", p.slopes()))?;
        check(p.rows.iter().all(|r| r.slope == 0.0), format!("nonzero slope {:?}", p.slopes()))?;
    }
    let e = within(t, 60)?;
    Ok(format!("isometric on {maps} translation tables at depths 1..8; slopes 0 for bases 3, 2 and steps {{+1}}, {{+1,+3}}; {e:.1?}"))
}

fn ac5() -> Outcome {
    let t = Instant::now();
    let g = TreeSample::build(2, 3).and_then(|s| s.pseudogroup()).map_err(|e| e.to_string())?;
    let r = lipschitz_audit(&g, 3, 4).map_err(|e| e.to_string())?;
    check(r.violations == 0, format!("{} violations", r.violations))?;
    for row in &r.rows {
        let bound = Q::from_integer(2.into()).pow(row.length as i32);
        let lo = Q::from_integer(1.into()) / &bound;
        check(row.min_ratio >= lo && row.max_ratio <= bound, format!("word {} outside [2^-{}, 2^{}]", row.word, row.length, row.length))?;
    }
    let e = within(t, 120)?;
    Ok(format!("{} words of length <= 3, distortion within [2^-a, 2^a], 0 violations; {e:.1?}", r.rows.len()))
}

fn ac6() -> Outcome {
    let t = Instant::now();
    let oracle = enumerate_points(2, 1).map_err(|e| e.to_string())?.len();
    check(oracle == 11, format!("enumeration gave {oracle}"))?;
    let r = covering_counts(2, 1..=4).map_err(|e| e.to_string())?;
    let d: Vec<f64> = r.rows.iter().map(|row| row.dimension_slope).collect();
    check(r.rows[0].count.to_string() == oracle.to_string(), "N_1 differs from enumeration")?;
    check((d[0] - (oracle as f64).log2()).abs() < 1e-12, format!("d_1 = {}", d[0]))?;
    check(d.windows(2).all(|w| w[1] > w[0]), format!("slopes {d:?}"))?;
    let e = within(t, 300)?;
    Ok(format!("d_k = {d:.4?} strictly increasing, d_1 = log2 11; {e:.1?}"))
}

fn ac7() -> Outcome {
    let t = Instant::now();
    let p = exact_profile(2, &[q(1, 4), q(1, 8)], 0..=6).map_err(|e| e.to_string())?;
    let s = p.slopes();
    check(s[1] > s[0], format!("slopes {s:?}"))?;
    let flat = entropy_profile(&odometer(&[2; 8], &[1], 3), &[q(1, 6)], 0..=6, 8).map_err(|e| e.to_string())?;
    check(flat.all_flat(), "odometer contrast is not flat")?;
    let e = within(t, 300)?;
    Ok(format!("slope at 1/8 = {:.1} > slope at 1/4 = {:.1}; odometer flat; {e:.1?}", s[1], s[0]))
}

fn ac8() -> Outcome {
    let t = Instant::now();
    let ms = MetricSpace::new(LevelSpace::periodic(vec![], vec![2], true).unwrap(), Metric::default()).unwrap();
    let r = box_dimension_estimate(&ms, 1..=12).map_err(|e| e.to_string())?;
    for row in &r.rows {
        check(row.count.to_string() == (1u64 << row.depth).to_string(), format!("count at depth {}", row.depth))?;
    }
    let target = 2f64.ln() / 3f64.ln();
    let slope = r.slope.ok_or("no slope")?;
    check((slope - target).abs() <= 0.02, format!("slope {slope}"))?;
    let (code, out) = matchbox(&["dimension", &spec("dyadic-fiber.json")]);
    let v: serde_json::Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
    let cli = v["report"]["slope"].as_f64().ok_or("cli slope missing")?;
    check(code == 0 && (cli - target).abs() <= 0.02, format!("cli slope {cli}"))?;
    let e = within(t, 5)?;
    Ok(format!("slope {slope:.4} vs log2/log3 = {target:.4}; {e:.1?}"))
}

fn ac9() -> Outcome {
    let t = Instant::now();
    let dyadic = MetricSpace::new(LevelSpace::explicit(vec![2; 8], true).unwrap(), Metric::default()).unwrap();
    let a = doubling_check(&dyadic, 2, 8).map_err(|e| e.to_string())?;
    check(a.passed(), format!("dyadic: {:?}", a.verdict))?;
    let ms = TreeSample::build(2, 3).and_then(|s| s.metric_space()).map_err(|e| e.to_string())?;
    let b = doubling_check(&ms, 2, 4).map_err(|e| e.to_string())?;
    let witness = match &b.verdict {
        DoublingVerdict::Fail { witness } => describe_witness(witness),
        v => return Err(format!("treespace: {v:?}")),
    };
    let e = within(t, 120)?;
    Ok(format!("dyadic passes with C = 2 at depth 8; treespace fails: {witness}; {e:.1?}"))
}

fn ac10() -> Outcome {
    let t = Instant::now();
    let g1 = odometer(&[2; 4], &[1], 3);
    let g2 = odometer(&[2; 4], &[1], 3);
    let spec_odo = FusionSpec {
        v1: CylinderSet::cylinder(&g1.ms.space, &[0]),
        v2: CylinderSet::cylinder(&g2.ms.space, &[0]),
        h: Gluing::identity_on(1, [vec![0]]),
        g1,
        g2,
    };
    let f = fuse(&spec_odo).map_err(|e| e.to_string())?;
    let m = fused_minimality(&spec_odo, &f, 3, 24).map_err(|e| e.to_string())?;
    check(m.fused.is_minimal(), format!("odometer fusion: {:?}", m.fused.verdict))?;

    let sample = TreeSample::build(2, 3).map_err(|e| e.to_string())?;
    let tg = sample.pseudogroup().map_err(|e| e.to_string())?;
    let og = odometer(&[2; 4], &[1], 2);
    let p = sample.words[0].clone();
    let spec_tree = FusionSpec {
        v1: CylinderSet::cylinder(&tg.ms.space, &p),
        v2: CylinderSet::cylinder(&og.ms.space, &[0, 0, 0, 0]),
        h: Gluing { depth: 4, rules: vec![(p, vec![0, 0, 0, 0])] },
        g1: tg,
        g2: og,
    };
    let ft = fuse(&spec_tree).map_err(|e| e.to_string())?;
    let d = entropy_dominance(&ft, &spec_tree.g1, &[q(1, 2), q(1, 4), q(1, 8)], 0..=3).map_err(|e| e.to_string())?;
    check(d.dominates, format!("dominance fails: {:?}", d.rows.iter().find(|r| r.fused < r.factor)))?;
    let e = within(t, 300)?;
    Ok(format!("odometer fusion minimal at (3, 24); treespace fusion dominates on {} grid points; {e:.1?}", d.rows.len()))
}

fn ac11() -> Outcome {
    let t = Instant::now();
    let runs: Vec<Vec<String>> = vec![
        vec!["classify".into(), spec("circle-2-3.json"), spec("circle-gap.json")],
        vec!["classify".into(), spec("torus-2.json"), spec("torus-4.json")],
        vec!["entropy".into(), spec("odometer-small.json"), "--epsilon".into(), "1/2,1/6".into()],
        vec!["entropy".into(), spec("treespace.json"), "--epsilon".into(), "1/4,1/8".into(), "--format".into(), "csv".into()],
        vec!["fuse".into(), spec("fusion-odometers.json")],
        vec!["treespace".into(), "2".into(), "4".into()],
        vec!["dimension".into(), spec("dyadic-fiber.json"), "--format".into(), "csv".into()],
        vec!["audit".into(), spec("odometer-small.json"), "--alpha".into(), "2".into()],
        vec!["doubling".into(), spec("dyadic-fiber.json"), "--format".into(), "text".into()],
    ];
    for args in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (c1, a) = matchbox(&args);
        let (c2, b) = matchbox(&args);
        check(c1 == c2 && a == b && !a.is_empty(), format!("{args:?} differs between runs"))?;
    }
    let (code, emitted) = matchbox(&["fuse", &spec("fusion-odometers.json")]);
    check(code == 0, "fuse failed")?;
    let parsed: PseudogroupSpec = serde_json::from_slice(&emitted).map_err(|e| e.to_string())?;
    let g = parsed.build().map_err(|e| e.to_string())?;
    let reemitted = matchbox_core::spec::to_json(&PseudogroupSpec::from_pseudogroup(&g)).map_err(|e| e.to_string())?;
    check(reemitted.as_bytes() == emitted.as_slice(), "re-emitted spec differs")?;
    let verdict = minimality_check(&g, 2, 16).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let copy = dir.path().join("fused.json");
    std::fs::write(&copy, &reemitted).map_err(|e| e.to_string())?;
    let again = PseudogroupSpec::build(&serde_json::from_str(&std::fs::read_to_string(&copy).unwrap()).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    check(minimality_check(&again, 2, 16).map_err(|e| e.to_string())? == verdict, "verdict changed after re-parse")?;
    let e = within(t, 300)?;
    Ok(format!("{} commands byte-identical across runs; fused spec re-parses to the same spec and verdict; {e:.1?}", runs.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
        ("AC11", ac11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| x == name) {
            continue;
        }
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(msg) => println!("{name} pass: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("{name} FAIL: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
