use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rxboost::filter::{filter_reactions, FilterCandidate, FilterConfig};
use rxboost::generator::{Direction, Generator, NativeGenerator};
use rxboost::synthetic::random_molecule;
use rxboost::synthetic::{reaction_types, sample_reactant_sets, sample_reactions};
use rxboost::templates::{build_library, find_embeddings, MATCH_BUDGET};
use rxboost::{Molecule, Provenance, TemplateLibrary};

/// Every injective map checked pair by pair.
fn brute_embeddings(p: &Molecule, t: &Molecule) -> BTreeSet<Vec<usize>> {
    fn rec(p: &Molecule, t: &Molecule, phi: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
        if phi.len() == p.atom_count() {
            let ok = (0..phi.len()).all(|i| {
                p.atom(i).element == t.atom(phi[i]).element
                    && (0..i).all(|j| {
                        let pb = p.bond_between(i, j).map(|b| b.order);
                        let tb = t.bond_between(phi[i], phi[j]).map(|b| b.order);
                        pb == tb
                    })
            });
            if ok {
                out.insert(phi.clone());
            }
            return;
        }
        for x in 0..t.atom_count() {
            if !phi.contains(&x) {
                phi.push(x);
                rec(p, t, phi, out);
                phi.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    rec(p, t, &mut Vec::new(), &mut out);
    out
}

#[test]
fn matcher_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut nonempty = 0;
    for _ in 0..400 {
        let pattern = random_molecule(&mut rng, 4);
        let target = random_molecule(&mut rng, 8);
        let found =
            find_embeddings(&pattern, &target, |a, b| pattern.atom(a).element == target.atom(b).element, MATCH_BUDGET)
                .unwrap();
        let got: BTreeSet<Vec<usize>> = found.iter().cloned().collect();
        assert_eq!(got.len(), found.len(), "duplicate embeddings");
        assert_eq!(got, brute_embeddings(&pattern, &target));
        nonempty += usize::from(!got.is_empty());
    }
    assert!(nonempty > 50, "too few positive cases ({nonempty})");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_min_count_only_removes_templates(seed in 0u64..1000, low in 0u64..4, extra in 0u64..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let types = reaction_types();
        let corpus = sample_reactions(&types[..8], 60, &mut rng);
        let (lib, _) = build_library(&corpus, 1, 0).unwrap();
        let lo = lib.clone().with_min_count(low).freeze_or_empty();
        let hi = lib.clone().with_min_count(low + extra).freeze_or_empty();
        let lo_set = lo.signatures();
        for sig in hi.signatures() {
            prop_assert!(lo_set.contains(sig));
        }
        // more data never lowers a count
        let (more, _) = build_library(&[corpus.clone(), corpus[..10].to_vec()].concat(), 1, 0).unwrap();
        for (sig, n) in lib.sorted_entries() {
            prop_assert!(more.count(sig) >= n);
        }
    }
}

#[test]
fn higher_threshold_keeps_a_subset() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let types = reaction_types();
    let (lib, _) = build_library(&sample_reactions(&types[..12], 200, &mut rng), 1, 0).unwrap();
    let generator = NativeGenerator::new(lib.freeze().unwrap()).unwrap();

    // Forward predictions paired with the right product or a shuffled one.
    let sets = sample_reactant_sets(&types[..12], 120, &mut rng);
    let preds = generator.generate_batch(&sets, Direction::Forward, 1).unwrap();
    let mut products: Vec<String> = preds.iter().filter_map(|p| p.first().map(|c| c.output.clone())).collect();
    assert!(products.len() > 60);
    let mut candidates = Vec::new();
    for (i, (s, p)) in sets.iter().zip(&preds).enumerate() {
        if let Some(top) = p.first() {
            candidates.push(FilterCandidate {
                id: format!("ok{i}"),
                reactants: s.clone(),
                product: top.output.clone(),
                provenance: Provenance::InSilicoFromReactants,
            });
        }
    }
    products.shuffle(&mut rng);
    for (i, (s, p)) in sets.iter().zip(&products).enumerate() {
        candidates.push(FilterCandidate {
            id: format!("mix{i}"),
            reactants: s.clone(),
            product: p.clone(),
            provenance: Provenance::InSilicoFromReactants,
        });
    }

    // An empty filter library sends everything through the similarity stage.
    let empty = TemplateLibrary::new(u64::MAX - 1).freeze_or_empty();
    let kept_at = |t: f64| -> BTreeSet<String> {
        let cfg = FilterConfig { similarity_threshold: t, ..FilterConfig::default() };
        let out = filter_reactions(&candidates, &empty, &generator, &cfg).unwrap();
        out.decisions.iter().filter(|d| d.verdict.as_str() == "kept").map(|d| d.id.clone()).collect()
    };
    let thresholds = [0.0, 0.3, 0.55, 0.8, 0.9, 1.0];
    let kept: Vec<BTreeSet<String>> = thresholds.iter().map(|&t| kept_at(t)).collect();
    for w in kept.windows(2) {
        assert!(w[1].is_subset(&w[0]));
    }
    assert!(kept[0].len() > kept[5].len());
}
