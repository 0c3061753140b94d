use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use matchbox_core::entropy::{entropy_profile, EntropyProfile, Mode};
use matchbox_core::fusion::fuse as fuse_systems;
use matchbox_core::geometry::{box_dimension_estimate, describe_witness, doubling_check, DoublingVerdict};
use matchbox_core::pseudogroup::{lipschitz_audit, Pseudogroup};
use matchbox_core::rational::{fmt_q, parse_q, Q};
use matchbox_core::solenoid::{
    bounded_tower_equivalent, classify_chains, fiber, Answer, ClassificationReport, DEFAULT_HORIZON_1D,
    DEFAULT_HORIZON_CHAIN,
};
use matchbox_core::spec::{
    to_json, CatalogSpec, FusionFile, Presentation, PresentationSpec, PseudogroupSpec, SpaceSpec, PRESENTATION_SCHEMA,
    PSEUDOGROUP_SCHEMA, SPACE_SCHEMA,
};
use matchbox_core::treespace::{
    covering_counts, enumerate_points, exact_profile, line_control_counts, pattern_count_u64, PointedTreeApprox,
    MAX_ENUMERATED,
};
use matchbox_core::{Error, MetricSpace, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::output::{csv, envelope, from_error, unsupported, Context, Outcome, DECIDED, INCONCLUSIVE};
use crate::Format;

pub const CACHE_ENV: &str = "MATCHBOX_CACHE_DIR";
const CACHE_SCHEMA: &str = "matchbox.treespace-cache/1";

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn schema_of(v: &Value) -> &str {
    v.get("schema").and_then(Value::as_str).unwrap_or("")
}

fn load_pseudogroup(path: &Path) -> Result<(PseudogroupSpec, Pseudogroup)> {
    let spec: PseudogroupSpec = serde_json::from_value(read_json(path)?)?;
    let g = spec.build()?;
    Ok((spec, g))
}

fn load_presentation(path: &Path) -> Result<Presentation> {
    let spec: PresentationSpec = serde_json::from_value(read_json(path)?)?;
    spec.build()
}

/// A metric space from a space document, a pseudogroup spec or a circle presentation.
fn load_space(path: &Path, depth: usize) -> Result<MetricSpace> {
    let v = read_json(path)?;
    match schema_of(&v) {
        SPACE_SCHEMA => serde_json::from_value::<SpaceSpec>(v)?.build(),
        PSEUDOGROUP_SCHEMA => Ok(serde_json::from_value::<PseudogroupSpec>(v)?.build()?.ms),
        PRESENTATION_SCHEMA => match serde_json::from_value::<PresentationSpec>(v)?.build()? {
            Presentation::Circle(p) => fiber(&p, depth, None),
            Presentation::Torus(_) => Err(Error::Input("Z^n presentations have no single-fiber space here".into())),
        },
        other => Err(Error::Input(format!("{}: unknown schema {other:?}", path.display()))),
    }
}

fn shown(p: &Path) -> String {
    p.display().to_string()
}

/// "a..b" (inclusive), "a..=b" or "b" for 0..=b.
pub fn parse_range(s: &str) -> Result<RangeInclusive<usize>> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| Error::Usage(format!("bad range {s:?}")));
    let r = match s.split_once("..") {
        Some((a, b)) => num(a)?..=num(b.trim_start_matches('='))?,
        None => 0..=num(s)?,
    };
    if r.is_empty() {
        return Err(Error::Usage(format!("empty range {s:?}")));
    }
    Ok(r)
}

pub fn classify(ctx: &Context, p: &Path, q: &Path, horizon: Option<usize>) -> Outcome {
    let params = json!({ "p": shown(p), "q": shown(q), "horizon": horizon });
    let result = (|| -> Result<ClassificationReport> {
        match (load_presentation(p)?, load_presentation(q)?) {
            (Presentation::Circle(a), Presentation::Circle(b)) => {
                bounded_tower_equivalent(&a, &b, horizon.unwrap_or(DEFAULT_HORIZON_1D))
            }
            (Presentation::Torus(a), Presentation::Torus(b)) => {
                classify_chains(&a, &b, horizon.unwrap_or(DEFAULT_HORIZON_CHAIN))
            }
            _ => Err(Error::Input("cannot compare a circle presentation with a Z^n chain".into())),
        }
    })();
    let report = match result {
        Ok(r) => r,
        Err(e) => return from_error(ctx, "classify", params, e),
    };
    let params = json!({ "p": shown(p), "q": shown(q), "horizon": report.horizon });
    let code = if report.homeomorphic == Answer::Inconclusive || report.lipschitz == Answer::Inconclusive {
        INCONCLUSIVE
    } else {
        DECIDED
    };
    let verdict = report.summary();
    let body = match ctx.format {
        Format::Json => envelope(ctx, "classify", params, &json!({ "verdict": verdict, "classification": report })),
        Format::Text => {
            let basis = if report.exact { "exact".to_string() } else { format!("at horizon {}", report.horizon) };
            Ok(format!("{verdict} ({basis})\n"))
        }
        Format::Csv => return unsupported("classify", ctx.format),
    };
    match body {
        Ok(b) => Outcome::ok(b, code),
        Err(e) => Outcome::error(e),
    }
}

pub fn entropy(ctx: &Context, spec: &Path, epsilon: &[String], ell: &str, depth: Option<usize>) -> Outcome {
    let parsed = (|| -> Result<(Vec<Q>, RangeInclusive<usize>)> {
        let eps = epsilon.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>()?;
        Ok((eps, parse_range(ell)?))
    })();
    let (eps, ells) = match parsed {
        Ok(v) => v,
        Err(e) => return Outcome::error(e),
    };
    let eps_shown: Vec<String> = eps.iter().map(fmt_q).collect();
    let params = |d: Option<usize>| {
        json!({ "spec": shown(spec), "epsilon": eps_shown, "ell": [ells.start(), ells.end()], "depth": d })
    };
    let result = (|| -> Result<EntropyProfile> {
        let (s, g) = load_pseudogroup(spec)?;
        match &s.catalog {
            Some(CatalogSpec::Treespace { n, .. }) => exact_profile(*n as u32, &eps, ells.clone()),
            _ => entropy_profile(&g, &eps, ells.clone(), depth.unwrap_or(g.depth)),
        }
    })();
    let profile = match result {
        Ok(p) => p,
        Err(e) => return from_error(ctx, "entropy", params(depth), e),
    };
    let greedy = profile.rows.iter().flat_map(|r| &r.entries).any(|e| e.mode == Mode::Greedy);
    let code = if greedy { INCONCLUSIVE } else { DECIDED };
    let body = match ctx.format {
        Format::Json => envelope(ctx, "entropy", params(Some(profile.depth)), &profile),
        Format::Csv => Ok(csv(
            &["epsilon", "ell", "count", "mode"],
            profile.rows.iter().flat_map(|r| {
                r.entries.iter().map(|e| {
                    let mode = match e.mode {
                        Mode::Exact => "exact",
                        Mode::Greedy => "greedy",
                    };
                    vec![fmt_q(&r.epsilon), e.ell.to_string(), e.count.to_string(), mode.to_string()]
                })
            }),
        )),
        Format::Text => return unsupported("entropy", ctx.format),
    };
    match body {
        Ok(b) => Outcome { body: Some(b), message: greedy.then(|| "note: some counts are greedy lower bounds".into()), code },
        Err(e) => Outcome::error(e),
    }
}

pub fn fuse(ctx: &Context, spec: &Path) -> Outcome {
    if ctx.format != Format::Json {
        return unsupported("fuse", ctx.format);
    }
    let result = (|| -> Result<String> {
        let file: FusionFile = serde_json::from_value(read_json(spec)?)?;
        let fs = file.build(spec.parent())?;
        let fused = fuse_systems(&fs)?;
        to_json(&PseudogroupSpec::from_pseudogroup(&fused.pseudogroup))
    })();
    match result {
        Ok(b) => Outcome::ok(b, DECIDED),
        Err(e) => from_error(ctx, "fuse", json!({ "spec": shown(spec) }), e),
    }
}

#[derive(Serialize, Deserialize)]
struct TreeCache {
    schema: String,
    n: u8,
    k: usize,
    count: u64,
    points: Vec<PointedTreeApprox>,
}

fn cache_path(n: u8, k: usize) -> Option<PathBuf> {
    let dir = std::env::var_os(CACHE_ENV)?;
    Some(PathBuf::from(dir).join(format!("treespace-n{n}-k{k}.json")))
}

fn read_cache(path: &Path, n: u8, k: usize) -> Option<u64> {
    let text = std::fs::read_to_string(path).ok()?;
    let c: TreeCache = serde_json::from_str(&text).ok()?;
    let sound = c.schema == CACHE_SCHEMA
        && c.n == n
        && c.k == k
        && c.points.len() as u64 == c.count
        && c.points.iter().all(|t| t.n == n && t.radius == k && t.validate().is_ok());
    sound.then_some(c.count)
}

/// Enumerated count at radius k, from the cache when a valid one exists.
fn enumerated_count(n: u8, k: usize) -> Result<(u64, &'static str)> {
    let path = cache_path(n, k);
    if let Some(c) = path.as_deref().and_then(|p| read_cache(p, n, k)) {
        return Ok((c, "cache"));
    }
    let points = enumerate_points(n, k)?;
    let count = points.len() as u64;
    if let Some(p) = path {
        let doc = TreeCache { schema: CACHE_SCHEMA.into(), n, k, count, points };
        let written = p
            .parent()
            .map_or(Ok(()), std::fs::create_dir_all)
            .and_then(|_| std::fs::write(&p, serde_json::to_string(&doc).unwrap_or_default()));
        if let Err(e) = written {
            eprintln!("warning: cache not written to {}: {e}", p.display());
        }
    }
    Ok((count, "enumeration"))
}

pub fn treespace(ctx: &Context, n: u8, k: usize) -> Outcome {
    let params = json!({ "n": n, "k": k });
    let result = (|| -> Result<Value> {
        if k == 0 {
            return Err(Error::Usage("k must be at least 1".into()));
        }
        let covering = if n == 1 { line_control_counts(1..=k)? } else { covering_counts(n as u32, 1..=k)? };
        let mut checks = Vec::new();
        for row in &covering.rows {
            let feasible = n >= 2 && pattern_count_u64(n as u32, row.k).is_some_and(|c| c <= MAX_ENUMERATED);
            if !feasible {
                continue;
            }
            let (count, source) = enumerated_count(n, row.k)?;
            if row.count != count.into() {
                return Err(Error::Precondition(format!(
                    "enumeration found {count} approximations at k = {} but the recursion gives {}",
                    row.k, row.count
                )));
            }
            checks.push(json!({ "k": row.k, "count": count, "source": source }));
        }
        Ok(json!({ "covering": covering, "enumeration": checks }))
    })();
    let report = match result {
        Ok(r) => r,
        Err(e) => return from_error(ctx, "treespace", params, e),
    };
    let body = match ctx.format {
        Format::Json => envelope(ctx, "treespace", params, &report),
        Format::Csv => Ok(csv(
            &["k", "count", "dimension_slope"],
            report["covering"]["rows"].as_array().into_iter().flatten().map(|r| {
                let count = r["count"].as_str().map(str::to_string).unwrap_or_else(|| r["count"].to_string());
                vec![r["k"].to_string(), count, r["dimension_slope"].to_string()]
            }),
        )),
        Format::Text => return unsupported("treespace", ctx.format),
    };
    match body {
        Ok(b) => Outcome::ok(b, DECIDED),
        Err(e) => Outcome::error(e),
    }
}

pub fn dimension(ctx: &Context, space: &Path, depth: usize) -> Outcome {
    let params = json!({ "space": shown(space), "depth": depth });
    let result = load_space(space, depth).and_then(|ms| box_dimension_estimate(&ms, 1..=depth));
    let report = match result {
        Ok(r) => r,
        Err(e) => return from_error(ctx, "dimension", params, e),
    };
    let body = match ctx.format {
        Format::Json => envelope(ctx, "dimension", params, &report),
        Format::Csv => Ok(csv(
            &["scale", "count"],
            report.rows.iter().map(|r| vec![fmt_q(&r.scale), r.count.to_string()]),
        )),
        Format::Text => return unsupported("dimension", ctx.format),
    };
    match body {
        Ok(b) => Outcome::ok(b, DECIDED),
        Err(e) => Outcome::error(e),
    }
}

pub fn audit(ctx: &Context, spec: &Path, alpha: usize, depth: Option<usize>) -> Outcome {
    let params = |d: Option<usize>| json!({ "spec": shown(spec), "alpha": alpha, "depth": d });
    let result = load_pseudogroup(spec).and_then(|(_, g)| lipschitz_audit(&g, alpha, depth.unwrap_or(g.depth)));
    let report = match result {
        Ok(r) => r,
        Err(e) => return from_error(ctx, "audit", params(depth), e),
    };
    let body = match ctx.format {
        Format::Json => envelope(ctx, "audit", params(Some(report.depth)), &report),
        Format::Csv => Ok(csv(
            &["word", "length", "pairs", "distortion", "bound", "violations"],
            report.rows.iter().map(|r| {
                vec![
                    r.word.clone(),
                    r.length.to_string(),
                    r.pairs.to_string(),
                    fmt_q(&r.distortion),
                    fmt_q(&r.bound),
                    r.violations.to_string(),
                ]
            }),
        )),
        Format::Text => return unsupported("audit", ctx.format),
    };
    match body {
        Ok(b) => Outcome::ok(b, DECIDED),
        Err(e) => Outcome::error(e),
    }
}

pub fn doubling(ctx: &Context, space: &Path, c: u64, depth: usize) -> Outcome {
    let params = json!({ "space": shown(space), "c": c, "depth": depth });
    let result = load_space(space, depth).and_then(|ms| doubling_check(&ms, c, depth));
    let report = match result {
        Ok(r) => r,
        Err(e) => return from_error(ctx, "doubling", params, e),
    };
    let body = match ctx.format {
        Format::Json => envelope(ctx, "doubling", params, &report),
        Format::Text => Ok(match &report.verdict {
            DoublingVerdict::Pass { checks } => format!("pass: C = {c} up to depth {depth} ({checks} checks)\n"),
            DoublingVerdict::Fail { witness } => format!("fail: {}\n", describe_witness(witness)),
        }),
        Format::Csv => return unsupported("doubling", ctx.format),
    };
    match body {
        Ok(b) => Outcome::ok(b, DECIDED),
        Err(e) => Outcome::error(e),
    }
}
