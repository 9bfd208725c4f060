//! Acceptance criteria, one test each. Each test prints a PASS/FAIL line
//! (visible with `--nocapture`); cargo's own summary lists them as
//! `criterion_NN_*`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rxboost::chem::{canonicalize, is_isomorphic, parse_smiles, write_smiles, write_smiles_with_order, Molecule};
use rxboost::evalkit::{exact_match, maxfrag_match, rare_subset, topk_table, PredictionSet};
use rxboost::filter::{filter_reactions, retention_report, FilterCandidate, FilterConfig};
use rxboost::fingerprint::{fingerprint_set, tanimoto, FingerprintBitset, DEFAULT_LENGTH, DEFAULT_RADIUS};
use rxboost::generator::{
    AdapterGenerator, Direction, Endpoint, GenerationCandidate, Generator, GeneratorError, NativeGenerator,
};
use rxboost::pipeline::{boost, predict, BoostOptions, PipelineConfig};
use rxboost::synthetic::{random_molecule, reaction, reaction_types, write_scenario, Instance, ReactionType, Scenario};
use rxboost::templates::{apply_template, build_library, extract_template, match_template, FrozenLibrary};
use rxboost::{Provenance, ReactionRecord, TemplateLibrary};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

const DIVERSE: &str = include_str!("data/diverse.smi");

fn c1_round_trip() -> Outcome {
    let lines: Vec<&str> = DIVERSE.lines().filter(|l| !l.trim().is_empty()).collect();
    ensure!(lines.len() >= 1000, "corpus has {} entries", lines.len());
    let start = Instant::now();
    let mut failures = Vec::new();
    for line in &lines {
        let first = parse_smiles(line).map_err(|e| format!("{line}: {e}"))?;
        let text = write_smiles(&first, None).map_err(|e| format!("{line}: {e}"))?;
        let second = parse_smiles(&text).map_err(|e| format!("{line} -> {text}: {e}"))?;
        if !is_isomorphic(&first.normalized(), &second.normalized()) {
            failures.push(*line);
        }
    }
    let elapsed = start.elapsed();
    ensure!(failures.is_empty(), "{} not isomorphic, first {}", failures.len(), failures[0]);
    ensure!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
    Ok(format!("{} SMILES in {:.2}s", lines.len(), elapsed.as_secs_f64()))
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Minimum over every root and every combination of neighbor orders.
fn brute_force_canonical(mol: &Molecule) -> String {
    let mol = mol.normalized();
    let n = mol.atom_count();
    let perms: Vec<Vec<Vec<usize>>> =
        (0..n).map(|i| permutations(&mol.neighbors(i).iter().map(|&(nb, _)| nb).collect::<Vec<_>>())).collect();
    let mut best: Option<String> = None;
    for root in 0..n {
        let mut choice = vec![0usize; n];
        loop {
            let orders: Vec<Vec<usize>> = (0..n).map(|i| perms[i][choice[i]].clone()).collect();
            let s = write_smiles_with_order(&mol, root, &orders).unwrap();
            if best.as_ref().is_none_or(|b| s < *b) {
                best = Some(s);
            }
            let mut k = 0;
            while k < n {
                choice[k] += 1;
                if choice[k] < perms[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    best.unwrap()
}

fn c2_canonical_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut seen = BTreeSet::new();
    let mut suite = Vec::new();
    for _ in 0..20_000 {
        if suite.len() == 600 {
            break;
        }
        let m = random_molecule(&mut rng, 8);
        let write_outs: usize =
            (0..m.atom_count()).map(|i| (1..=m.degree(i)).product::<usize>()).product::<usize>() * m.atom_count();
        if write_outs <= 20_000 && seen.insert(canonicalize(&m)) {
            suite.push(m);
        }
    }
    ensure!(suite.len() >= 500, "only {} molecules generated", suite.len());
    let mut mismatches = 0;
    for m in &suite {
        ensure!(m.heavy_atom_count() <= 8, "suite molecule too large");
        if canonicalize(m) != brute_force_canonical(m) {
            mismatches += 1;
        }
    }
    ensure!(mismatches == 0, "{mismatches} of {} differ from the brute-force minimum", suite.len());
    Ok(format!("{} molecules, 0 mismatches", suite.len()))
}

fn random_bitset(rng: &mut ChaCha8Rng) -> FingerprintBitset {
    let mut fp = FingerprintBitset::new(256, 2).unwrap();
    for _ in 0..rng.gen_range(0..60) {
        fp.set(rng.gen_range(0..256));
    }
    fp
}

fn shuffled_write_out(mol: &Molecule, rng: &mut ChaCha8Rng) -> String {
    let root = rng.gen_range(0..mol.atom_count());
    let orders: Vec<Vec<usize>> = (0..mol.atom_count())
        .map(|i| {
            let mut o: Vec<usize> = mol.neighbors(i).iter().map(|&(nb, _)| nb).collect();
            o.shuffle(rng);
            o
        })
        .collect();
    write_smiles_with_order(mol, root, &orders).unwrap()
}

fn c3_tanimoto() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let (a, b) = (random_bitset(&mut rng), random_bitset(&mut rng));
        let ab = tanimoto(&a, &b).unwrap();
        ensure!(ab == tanimoto(&b, &a).unwrap(), "asymmetric");
        ensure!((0.0..=1.0).contains(&ab), "out of bounds: {ab}");
        ensure!(tanimoto(&a, &a).unwrap() == 1.0, "Tc(a,a) != 1");
        let inter = a.ones().filter(|&i| b.get(i)).count();
        let union = a.count_ones() as usize + b.count_ones() as usize - inter;
        let expected = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        ensure!((ab - expected).abs() < 1e-12, "Tc {ab} vs recount {expected}");
    }
    let mut a = FingerprintBitset::new(64, 2).unwrap();
    let mut b = FingerprintBitset::new(64, 2).unwrap();
    (0..5).for_each(|i| a.set(i));
    (2..7).for_each(|i| b.set(i));
    ensure!((tanimoto(&a, &b).unwrap() - 3.0 / 7.0).abs() < 1e-12, "3/7 example");

    let types = reaction_types();
    let mut pairs = 0;
    while pairs < 1000 {
        let mol = if pairs % 2 == 0 {
            let kind = types[rng.gen_range(0..types.len())];
            reaction(&Instance::random(kind, &mut rng)).product.without_maps().normalized()
        } else {
            random_molecule(&mut rng, 14).normalized()
        };
        let x = parse_smiles(&shuffled_write_out(&mol, &mut rng)).unwrap();
        let y = parse_smiles(&shuffled_write_out(&mol, &mut rng)).unwrap();
        ensure!(canonicalize(&x) == canonicalize(&y), "canonical forms differ for {}", canonicalize(&mol));
        let fx = fingerprint_set(&[x], DEFAULT_RADIUS, DEFAULT_LENGTH).unwrap();
        let fy = fingerprint_set(&[y], DEFAULT_RADIUS, DEFAULT_LENGTH).unwrap();
        ensure!(tanimoto(&fx, &fy).unwrap() == 1.0, "fingerprints differ for {}", canonicalize(&mol));
        pairs += 1;
    }
    Ok("10000 bitset pairs, 1000 traversal pairs".into())
}

fn distinct_instances(kind: ReactionType, n: usize, rng: &mut ChaCha8Rng) -> Vec<Instance> {
    let mut out: Vec<Instance> = Vec::new();
    while out.len() < n {
        let inst = Instance::random(kind, rng);
        if !out.contains(&inst) {
            out.push(inst);
        }
    }
    out
}

fn c4_template_round_trip() -> Outcome {
    let types = reaction_types();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut reactions = 0;
    let mut applied = 0;
    for &kind in &types[..20] {
        for inst in distinct_instances(kind, 10, &mut rng) {
            let rec = reaction(&inst);
            reactions += 1;
            let template = extract_template(&rec, 1).map_err(|e| format!("{}: {e}", inst.id()))?;
            let product = parse_smiles(&rec.canonical_product()).unwrap();
            let outs = apply_template(&template, &product, Direction::Retro);
            ensure!(outs.contains(&rec.canonical_reactants()), "{}: retro misses the reactants", inst.id());
            let reactants = parse_smiles(&rec.canonical_reactants()).unwrap();
            let products = apply_template(&template, &reactants, Direction::Forward);
            ensure!(!products.is_empty(), "{}: forward application produced nothing", inst.id());
            for p in products {
                let generated = ReactionRecord::new(parse_smiles(&p).unwrap(), &reactants, "gen");
                ensure!(match_template(&generated, &template), "{}: generated {p} not matched", inst.id());
                applied += 1;
            }
        }
    }
    Ok(format!("{reactions} reactions from 20 templates, {applied} generated reactions matched"))
}

/// Answers retro queries from a fixed table.
struct Table(HashMap<String, String>);

impl Generator for Table {
    fn name(&self) -> &str {
        "table"
    }

    fn generate_batch(
        &self,
        inputs: &[String],
        _direction: Direction,
        k: usize,
    ) -> Result<Vec<Vec<GenerationCandidate>>, GeneratorError> {
        Ok(inputs
            .iter()
            .map(|q| {
                self.0
                    .get(q)
                    .map(|o| vec![GenerationCandidate { output: o.clone(), score: 1.0, rank: 1 }])
                    .unwrap_or_default()
                    .into_iter()
                    .take(k)
                    .collect()
            })
            .collect())
    }
}

fn distinct_reactions(kind: ReactionType, n: usize, rng: &mut ChaCha8Rng) -> Vec<ReactionRecord> {
    distinct_instances(kind, n, rng).iter().map(reaction).collect()
}

fn set_tc(a: &str, b: &str) -> f64 {
    let fa = fingerprint_set(&[parse_smiles(a).unwrap()], DEFAULT_RADIUS, DEFAULT_LENGTH).unwrap();
    let fb = fingerprint_set(&[parse_smiles(b).unwrap()], DEFAULT_RADIUS, DEFAULT_LENGTH).unwrap();
    tanimoto(&fa, &fb).unwrap()
}

fn c5_filter_ledger() -> Outcome {
    let types = reaction_types();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Library: six types, eight training reactions each.
    let mut train = Vec::new();
    let mut candidates_a = Vec::new();
    for &kind in &types[..6] {
        let mut r = distinct_reactions(kind, 18, &mut rng);
        candidates_a.extend(r.split_off(8));
        train.extend(r);
    }
    let (lib, _) = build_library(&train, 1, 0).map_err(|e| e.to_string())?;
    let frozen: FrozenLibrary = lib.with_min_count(5).freeze().map_err(|e| e.to_string())?;
    let mut candidates_b = Vec::new();
    for &kind in &types[30..35] {
        candidates_b.extend(distinct_reactions(kind, 8, &mut rng));
    }
    ensure!(candidates_a.len() == 60 && candidates_b.len() == 40, "planted set has wrong size");

    // 15 exact round trips, 10 near misses above the threshold, 15 below.
    const UNRELATED: [&str; 3] = ["O=C=O", "N#N", "[Na+].[Cl-]"];
    let mut table = HashMap::new();
    let mut expected: BTreeMap<String, &str> = BTreeMap::new();
    let mut exact = BTreeSet::new();
    let mut candidates = Vec::new();
    for (i, r) in candidates_a.iter().chain(&candidates_b).enumerate() {
        let id = format!("c{i:03}");
        let reactants = r.canonical_reactants();
        let stage = match i {
            0..60 => "template_match",
            60..75 => {
                table.insert(r.canonical_product(), reactants.clone());
                exact.insert(id.clone());
                "similarity_pass"
            }
            75..85 => {
                let near = canonicalize(&parse_smiles(&format!("{reactants}.O")).unwrap());
                let tc = set_tc(&near, &reactants);
                ensure!((0.55..1.0).contains(&tc), "near-miss construction gave Tc {tc}");
                table.insert(r.canonical_product(), near);
                "similarity_pass"
            }
            _ => {
                let far = UNRELATED[i % 3].to_string();
                let tc = set_tc(&far, &reactants);
                ensure!(tc < 0.55, "far construction gave Tc {tc}");
                table.insert(r.canonical_product(), far);
                "similarity_fail"
            }
        };
        expected.insert(id.clone(), stage);
        candidates.push(FilterCandidate {
            id,
            reactants,
            product: r.canonical_product(),
            provenance: Provenance::InSilicoFromReactants,
        });
    }
    let inverse = Table(table);

    let run = |t: f64| {
        let cfg = FilterConfig { similarity_threshold: t, ..FilterConfig::default() };
        filter_reactions(&candidates, &frozen, &inverse, &cfg).map_err(|e| e.to_string())
    };
    let out = run(0.55)?;
    ensure!(out.decisions.len() == 100, "{} decisions", out.decisions.len());
    for d in &out.decisions {
        ensure!(
            d.stage.as_str() == expected[&d.id],
            "{}: stage {} expected {}",
            d.id,
            d.stage.as_str(),
            expected[&d.id]
        );
    }
    let kept = out.decisions.iter().filter(|d| d.verdict.as_str() == "kept").count();
    ensure!(kept == 85, "kept {kept}");
    let report = retention_report(&out.decisions).to_string();
    ensure!(report.contains("kept_fraction\t0.8500"), "retention report:\n{report}");

    let kept_at = |t: f64| -> Result<BTreeSet<String>, String> {
        Ok(run(t)?.decisions.into_iter().filter(|d| d.verdict.as_str() == "kept").map(|d| d.id).collect())
    };
    let sets: Vec<BTreeSet<String>> = [0.0, 0.55, 0.9, 1.0].iter().map(|&t| kept_at(t)).collect::<Result<_, _>>()?;
    for w in sets.windows(2) {
        ensure!(w[1].is_subset(&w[0]), "kept sets not nested across thresholds");
    }
    let mut strict: BTreeSet<String> =
        expected.iter().filter(|e| *e.1 == "template_match").map(|e| e.0.clone()).collect();
    strict.extend(exact);
    ensure!(sets[3] == strict, "threshold 1.0 kept {} instead of {}", sets[3].len(), strict.len());
    Ok(format!("kept 85/100, retention 0.85; threshold 1.0 keeps {}", sets[3].len()))
}

fn c6_metrics() -> Outcome {
    let truth = "CC(=O)O.CN";
    let ranked = |rank: Option<usize>| -> Vec<String> {
        let mut c: Vec<String> = (0..5).map(|i| format!("C{}", "C".repeat(i))).collect();
        if let Some(r) = rank {
            c[r - 1] = truth.to_string();
        }
        c
    };
    let ranks = [Some(1), Some(1), Some(2), Some(4), None, None, None, None, None, None];
    let sets: Vec<PredictionSet> = ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| PredictionSet { id: i.to_string(), ground_truth: truth.into(), candidates: ranked(r) })
        .collect();
    let table = topk_table(&sets, &[1, 5]).map_err(|e| e.to_string())?;
    ensure!(table.exact == [0.2, 0.4], "worked example gave {:?}", table.exact);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pool = ["CC(=O)Cl.CN", "CC(=O)O.CN", "CCO", "c1ccccc1Br.CO", "c1ccccc1Br.N", "CCN.CC(=O)Cl", "O"];
    let ks = [1, 2, 3, 5, 10];
    for trial in 0..1000 {
        let n = rng.gen_range(1..12);
        let preds: Vec<PredictionSet> = (0..n)
            .map(|i| {
                let ground_truth = canonicalize(&parse_smiles(pool[rng.gen_range(0..pool.len())]).unwrap());
                let candidates = (0..rng.gen_range(0..8))
                    .map(|_| canonicalize(&parse_smiles(pool[rng.gen_range(0..pool.len())]).unwrap()))
                    .collect();
                PredictionSet { id: i.to_string(), ground_truth, candidates }
            })
            .collect();
        let t = topk_table(&preds, &ks).map_err(|e| e.to_string())?;
        for (j, &k) in ks.iter().enumerate() {
            ensure!(t.maxfrag[j] >= t.exact[j], "trial {trial}: maxfrag below exact at k={k}");
            if j > 0 {
                ensure!(
                    t.exact[j] >= t.exact[j - 1] && t.maxfrag[j] >= t.maxfrag[j - 1],
                    "trial {trial}: not monotone"
                );
            }
            let hits = |f: fn(&str, &str) -> bool| {
                preds.iter().filter(|p| p.candidates.iter().take(k).any(|c| f(c, &p.ground_truth))).count() as f64
                    / n as f64
            };
            ensure!(t.exact[j] == hits(exact_match), "trial {trial}: exact recount differs at k={k}");
            ensure!(t.maxfrag[j] == hits(maxfrag_match), "trial {trial}: maxfrag recount differs at k={k}");
        }
    }
    Ok("worked example 0.2/0.4; 1000 random prediction sets".into())
}

fn c7_rare_nesting() -> Outcome {
    let types = reaction_types();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let counts = [1usize, 2, 4, 5, 9, 10, 12];
    let mut corpus = Vec::new();
    let mut count_of = Vec::new();
    for (t, &n) in counts.iter().enumerate() {
        for r in distinct_reactions(types[t], n, &mut rng) {
            corpus.push(r);
            count_of.push(n);
        }
    }
    let mut previous: Option<BTreeSet<usize>> = None;
    let mut sizes = Vec::new();
    for threshold in [2u64, 5, 10] {
        let subset = rare_subset(&corpus, threshold, 1).map_err(|e| e.to_string())?;
        ensure!(subset.extraction_errors == 0, "extraction errors");
        let got: BTreeSet<usize> = subset.members.into_iter().collect();
        let want: BTreeSet<usize> = (0..corpus.len()).filter(|&i| (count_of[i] as u64) < threshold).collect();
        ensure!(got == want, "Rare-{threshold}: {} members, expected {}", got.len(), want.len());
        if let Some(p) = &previous {
            ensure!(p.is_subset(&got), "Rare sets not nested at {threshold}");
        }
        sizes.push(got.len());
        previous = Some(got);
    }
    Ok(format!("Rare-2/5/10 sizes {sizes:?}"))
}

fn top1(heldout: &[ReactionRecord], library: &TemplateLibrary) -> Result<f64, String> {
    let frozen = library.clone().freeze().map_err(|e| e.to_string())?;
    let generator = NativeGenerator::new(frozen).map_err(|e| e.to_string())?;
    let preds = predict(heldout, &generator, 1).map_err(|e| e.to_string())?;
    let sets: Vec<PredictionSet> = heldout
        .iter()
        .zip(preds)
        .map(|(r, (id, candidates))| PredictionSet { id, ground_truth: r.canonical_reactants(), candidates })
        .collect();
    Ok(topk_table(&sets, &[1]).map_err(|e| e.to_string())?.exact[0])
}

fn c8_self_boost() -> Outcome {
    let start = Instant::now();
    let scenario = Scenario::default();
    ensure!(scenario.types == 50 && scenario.frequent + scenario.singletons == 30, "scenario shape");
    ensure!(scenario.unpaired == 5000, "scenario unpaired count");
    let data = scenario.build();
    let dir = tempfile::tempdir().unwrap();
    write_scenario(&data, dir.path(), dir.path().join("work").to_str().unwrap()).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::load(&dir.path().join("boost.toml"), &[]).map_err(|e| e.to_string())?;
    let min_count = cfg.templates.min_count;
    let radius = cfg.templates.radius;
    let manifest = boost(&cfg, BoostOptions::default()).map_err(|e| e.to_string())?;

    let kept = manifest.iterations[0].filter.as_ref().map_or(0, |f| f.kept);
    ensure!(kept > 0, "no in-silico reactions kept");

    let (before, _) = build_library(&data.train, radius, min_count).map_err(|e| e.to_string())?;
    let after = TemplateLibrary::read_file(&cfg.paths.workdir.join("library-final.tsv"), min_count)
        .map_err(|e| e.to_string())?;
    let heldout_sigs: BTreeSet<String> = data
        .heldout
        .iter()
        .filter_map(|r| extract_template(r, radius).ok().map(|t| t.signature().to_string()))
        .collect();
    let coverage = |lib: &TemplateLibrary| {
        let frozen = lib.freeze_or_empty();
        heldout_sigs.iter().filter(|s| frozen.contains(s)).count()
    };
    let (cov_before, cov_after) = (coverage(&before), coverage(&after));
    ensure!(cov_after > cov_before, "coverage {cov_before} -> {cov_after}");

    let (acc_before, acc_after) = (top1(&data.heldout, &before)?, top1(&data.heldout, &after)?);
    ensure!(acc_after >= acc_before, "top-1 {acc_before:.3} -> {acc_after:.3}");

    let singletons: Vec<ReactionRecord> = data
        .heldout
        .iter()
        .filter(|r| extract_template(r, radius).is_ok_and(|t| before.count(t.signature()) == 1))
        .cloned()
        .collect();
    ensure!(!singletons.is_empty(), "empty singleton slice");
    let (rare_before, rare_after) = (top1(&singletons, &before)?, top1(&singletons, &after)?);
    ensure!(rare_after > rare_before, "singleton top-1 {rare_before:.3} -> {rare_after:.3}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "kept {kept}; coverage {cov_before}->{cov_after} of {}; top-1 {acc_before:.3}->{acc_after:.3}; \
         singleton top-1 {rare_before:.3}->{rare_after:.3} ({} reactions); {:.0}s",
        heldout_sigs.len(),
        singletons.len(),
        elapsed.as_secs_f64()
    ))
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn c9_replay() -> Outcome {
    let scenario = Scenario { unpaired: 600, seed: 9, ..Scenario::default() };
    let dir = tempfile::tempdir().unwrap();
    write_scenario(&scenario.build(), dir.path(), "work").map_err(|e| e.to_string())?;
    let overrides = ["run.iterations=2".to_string(), "augment.n_variants=2".to_string()];
    let run = || -> Result<BTreeMap<String, Vec<u8>>, String> {
        let cfg = PipelineConfig::load(&dir.path().join("boost.toml"), &overrides).map_err(|e| e.to_string())?;
        boost(&cfg, BoostOptions::default()).map_err(|e| e.to_string())?;
        let files = files_under(&cfg.paths.workdir);
        fs::remove_dir_all(&cfg.paths.workdir).map_err(|e| e.to_string())?;
        Ok(files)
    };
    let (a, b) = (run()?, run()?);
    ensure!(a.keys().eq(b.keys()), "file sets differ");
    for (name, bytes) in &a {
        ensure!(*bytes == b[name], "{name} differs between runs");
    }
    for needed in ["iter-01/corpus/src.txt", "iter-02/decisions.tsv", "library-final.tsv", "manifest.json"] {
        ensure!(a.contains_key(needed), "missing {needed}");
    }
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

fn stub(mode: &str) -> AdapterGenerator {
    AdapterGenerator::new(Endpoint::Subprocess {
        program: env!("CARGO_BIN_EXE_adapter-stub").to_string(),
        args: vec![mode.to_string()],
    })
}

fn c10_adapter() -> Outcome {
    let inputs = vec!["OCC".to_string(), "c1ccccc1O".to_string()];
    let echo = stub("echo").generate_batch(&inputs, Direction::Retro, 3).map_err(|e| e.to_string())?;
    for (q, cands) in inputs.iter().zip(&echo) {
        ensure!(cands.len() == 1 && cands[0].output == canonicalize(&parse_smiles(q).unwrap()), "echo of {q}");
        ensure!(cands[0].rank == 1, "echo rank");
    }
    // more inputs than one request chunk
    let many: Vec<String> = (1..=150).map(|n| "C".repeat(n % 12 + 1)).collect();
    let got = stub("echo").generate_batch(&many, Direction::Forward, 1).map_err(|e| e.to_string())?;
    ensure!(got.len() == 150 && got.iter().all(|c| c.len() == 1), "chunked echo");

    let dir = tempfile::tempdir().unwrap();
    let (req, resp) = (dir.path().join("req.tsv"), dir.path().join("resp.tsv"));
    let files = AdapterGenerator::new(Endpoint::Files {
        request: req.clone(),
        response: resp.clone(),
        command: Some(vec![
            env!("CARGO_BIN_EXE_adapter-stub").into(),
            "echo".into(),
            "{request}".into(),
            "{response}".into(),
        ]),
    });
    let via_files = files.generate_batch(&inputs, Direction::Retro, 1).map_err(|e| e.to_string())?;
    ensure!(via_files == echo, "file endpoint disagrees with subprocess endpoint");

    let protocol = |mode: &str, needle: &str| -> Result<(), String> {
        match stub(mode).generate_batch(&inputs, Direction::Retro, 3) {
            Err(GeneratorError::Protocol(msg)) if msg.contains(needle) => Ok(()),
            other => Err(format!("{mode}: expected protocol error with '{needle}', got {other:?}")),
        }
    };
    protocol("gap", "expected rank 2")?;
    protocol("badid", "unknown id")?;
    protocol("nonmonotone", "score increases")?;

    let bad = stub("badsmiles");
    let out = bad.generate_batch(&inputs, Direction::Retro, 3).map_err(|e| e.to_string())?;
    ensure!(bad.dropped_lines() == 2, "dropped counter {}", bad.dropped_lines());
    for cands in &out {
        ensure!(cands.len() == 2, "badsmiles kept {} candidates", cands.len());
        ensure!(cands.iter().map(|c| c.rank).eq(1..=2), "ranks not renumbered");
    }
    let silent = stub("silent").generate_batch(&inputs, Direction::Retro, 3).map_err(|e| e.to_string())?;
    ensure!(silent.iter().all(Vec::is_empty), "silent stub produced candidates");

    let missing = AdapterGenerator::new(Endpoint::Subprocess { program: "/nonexistent/adapter".into(), args: vec![] });
    ensure!(
        matches!(missing.generate_batch(&inputs, Direction::Retro, 1), Err(GeneratorError::Transport(_))),
        "missing endpoint should be a transport error"
    );
    Ok("echo, file endpoint, rank gap, bad id, non-monotone scores, unparseable output".into())
}

/// Prints the criterion's PASS/FAIL line and fails the test on FAIL.
fn report(n: u32, name: &str, check: Check) {
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default())
    });
    match outcome {
        Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
        Err(why) => {
            println!("criterion {n:>2} FAIL  {name}: {why}");
            panic!("criterion {n} ({name}) failed: {why}");
        }
    }
}

#[test]
fn criterion_01_smiles_round_trip() {
    report(1, "SMILES round-trip", c1_round_trip);
}

#[test]
fn criterion_02_canonicalization_oracle() {
    report(2, "canonicalization oracle", c2_canonical_oracle);
}

#[test]
fn criterion_03_tanimoto_axioms() {
    report(3, "Tanimoto axioms and form invariance", c3_tanimoto);
}

#[test]
fn criterion_04_template_round_trip() {
    report(4, "template round trip", c4_template_round_trip);
}

#[test]
fn criterion_05_filter_ledger() {
    report(5, "filter ledger", c5_filter_ledger);
}

#[test]
fn criterion_06_metric_invariants() {
    report(6, "metric invariants", c6_metrics);
}

#[test]
fn criterion_07_rare_subset_nesting() {
    report(7, "rare-subset nesting", c7_rare_nesting);
}

#[test]
fn criterion_08_self_boosting() {
    report(8, "self-boosting directional check", c8_self_boost);
}

#[test]
fn criterion_09_replay_determinism() {
    report(9, "replay determinism", c9_replay);
}

#[test]
fn criterion_10_adapter_conformance() {
    report(10, "adapter conformance", c10_adapter);
}
