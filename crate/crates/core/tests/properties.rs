use groundplan::dataset::{expand_scenes, split_scenes};
use groundplan::eval::{failure_breakdown, majority_verdict, FailureType, Outcome, VoteRecord};
use groundplan::exploration::{image_count, CollectionStrategy};
use groundplan::grounding::{match_object, validate, GroundingVerdict, RuleSet, SynonymTable};
use groundplan::plan::{build_prompt, parse_plan_text, parse_step, render_steps, Plan, PromptTemplate};
use groundplan::scene::{achievable_grid_points, ground_truth_object_list, ObjectInstance, ObjectList, RoomType, Scene};
use groundplan::scenegen::{generate_synthetic_scene, SceneGenSpec};
use groundplan::data::Catalog;
use groundplan::{Point, Rect};
use proptest::prelude::*;

const VERBS: &[&str] = &["Move to", "Grasp", "Place", "Open", "Close", "Turn on", "Slice", "Wipe", "Pour", "Rinse"];
const NOUNS: &[&str] = &["cup", "sink", "coffee machine", "knife", "bread", "table", "trash can lid", "towel"];

fn step_text() -> impl Strategy<Value = String> {
    (0..VERBS.len(), 0..NOUNS.len(), prop::option::of((0..NOUNS.len(), prop::sample::select(vec!["on", "in", "with"]))))
        .prop_map(|(v, n, tail)| {
            let mut s = format!("{} the {}", VERBS[v], NOUNS[n]);
            if let Some((m, prep)) = tail {
                s.push_str(&format!(" {prep} the {}", NOUNS[m]));
            }
            s
        })
}

fn plan_text() -> impl Strategy<Value = String> {
    prop::collection::vec(step_text(), 1..8).prop_map(|steps| {
        steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("Step {}. {s}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    })
}

fn small_scene() -> impl Strategy<Value = Scene> {
    (
        1u32..=24,
        1u32..=24,
        prop::collection::vec((0u32..24, 0u32..24, 1u32..8, 1u32..8), 0..3),
        prop::collection::vec((0..NOUNS.len(), 0u32..=100, 0u32..=100), 1..10),
    )
        .prop_map(|(w, h, obs, objs)| {
            let (w, h) = (w as f64 * 0.25, h as f64 * 0.25);
            let obstacles = obs
                .into_iter()
                .map(|(x, y, dx, dy)| {
                    let x0 = (x as f64 * 0.25).min(w - 0.25);
                    let y0 = (y as f64 * 0.25).min(h - 0.25);
                    Rect::new(x0, y0, (x0 + dx as f64 * 0.25).min(w), (y0 + dy as f64 * 0.25).min(h))
                })
                .collect();
            let objects = objs
                .into_iter()
                .map(|(n, fx, fy)| ObjectInstance {
                    class_name: NOUNS[n].into(),
                    position: Point::new(w * fx as f64 / 100.0, h * fy as f64 / 100.0),
                })
                .collect();
            Scene {
                id: "p".into(),
                room_type: RoomType::Kitchen,
                bounds: Rect::new(0.0, 0.0, w, h),
                obstacles,
                objects,
                format_version: 1,
            }
        })
}

fn ballot() -> impl Strategy<Value = Option<FailureType>> {
    prop::sample::select(vec![None, Some(FailureType::Counterfactual), Some(FailureType::Hallucination)])
}

fn vote(i: usize, b: Option<FailureType>) -> VoteRecord {
    let who = format!("a{i}");
    match b {
        None => VoteRecord::success("x", &who),
        Some(k) => VoteRecord::failure("x", &who, k),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parse_step_is_total(s in "\\PC{0,80}") {
        let step = parse_step(&s);
        prop_assert!(step.object_phrases.iter().all(|p| !p.is_empty()));
        let _ = parse_plan_text(&s);
    }

    #[test]
    fn render_parse_identity(text in plan_text()) {
        let steps = parse_plan_text(&text).unwrap();
        let again = parse_plan_text(&render_steps(&steps)).unwrap();
        prop_assert_eq!(again, steps);
    }

    #[test]
    fn prompt_lists_objects_once(names in prop::collection::btree_set("[a-z]{3,8}( [a-z]{3,8})?", 0..8)) {
        let list = ObjectList::from_names(&names);
        let prompt = build_prompt(&PromptTemplate::bundled_inference(), &list, Some("Do it")).unwrap();
        prop_assert_eq!(prompt.matches(&list.render()).count(), 1);
        let leftover = prompt.contains(groundplan::plan::template::OBJECT_LIST_PLACEHOLDER);
        prop_assert!(!leftover);
    }

    #[test]
    fn ground_truth_is_permutation_invariant(scene in small_scene(), rot in 0usize..10) {
        let truth = ground_truth_object_list(&scene);
        let mut shuffled = scene.clone();
        let k = rot % shuffled.objects.len();
        shuffled.objects.rotate_left(k);
        shuffled.objects.reverse();
        prop_assert_eq!(ground_truth_object_list(&shuffled), truth.clone());
        prop_assert_eq!(ObjectList::from_names(truth.iter()), truth);
    }

    #[test]
    fn halving_grid_nests_points(scene in small_scene()) {
        let coarse = achievable_grid_points(&scene, 0.5);
        let fine = achievable_grid_points(&scene, 0.25);
        for p in &coarse {
            prop_assert!(fine.iter().any(|q| q.dist(p) < 1e-9));
        }
    }

    #[test]
    fn adding_objects_keeps_matches(
        names in prop::collection::btree_set(prop::sample::select(NOUNS.to_vec()), 0..6),
        extra in prop::sample::select(NOUNS.to_vec()),
        phrase in prop::sample::select(vec!["cup", "mug", "lid", "trash can", "coffee", "table", "sponge"]),
    ) {
        let syn = SynonymTable::bundled();
        let small = ObjectList::from_names(&names);
        let big = small.union(&ObjectList::from_names([extra]));
        if match_object(phrase, &small, &syn).is_match() {
            prop_assert!(match_object(phrase, &big, &syn).is_match());
        }
    }

    #[test]
    fn strict_success_implies_lenient_success(
        text in plan_text(),
        names in prop::collection::btree_set(prop::sample::select(NOUNS.to_vec()), 0..8),
    ) {
        let plan = Plan::from_text("x", &text, "test").unwrap();
        let list = ObjectList::from_names(&names);
        let syn = SynonymTable::bundled();
        if validate(&plan, &list, &syn, &RuleSet::strict()).verdict == GroundingVerdict::Success {
            prop_assert_eq!(validate(&plan, &list, &syn, &RuleSet::lenient()).verdict, GroundingVerdict::Success);
        }
    }

    #[test]
    fn majority_ignores_ballot_order(a in ballot(), b in ballot(), c in ballot()) {
        let base = majority_verdict(&[vote(0, a), vote(1, b), vote(2, c)]).unwrap();
        prop_assert_eq!(majority_verdict(&[vote(2, c), vote(0, a), vote(1, b)]).unwrap(), base);
        prop_assert_eq!(majority_verdict(&[vote(1, b), vote(2, c), vote(0, a)]).unwrap(), base);
    }

    #[test]
    fn failure_shares_permutation_invariant(
        kinds in prop::collection::vec(ballot(), 1..60),
        seed in any::<u64>(),
    ) {
        let outcomes: Vec<Outcome> = kinds
            .iter()
            .map(|k| k.map(Outcome::failure).unwrap_or(Outcome::SUCCESS))
            .collect();
        let mut shuffled = outcomes.clone();
        let k = (seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let a = failure_breakdown(&outcomes).unwrap();
        prop_assert_eq!(a, failure_breakdown(&shuffled).unwrap());
        prop_assert!((a.success + a.counterfactual + a.hallucination - 100.0).abs() <= 0.011);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unit_angle_halving_doubles(seed in any::<u64>(), room in 0usize..4, which in 0usize..4) {
        let scene = generate_synthetic_scene(&SceneGenSpec::for_room(RoomType::ALL[room], Catalog::bundled()), seed).unwrap();
        let s = match which {
            0 => CollectionStrategy::traversal(0.75, 120.0),
            1 => CollectionStrategy::random(0.75, 0.25, 120.0),
            2 => CollectionStrategy::overall_center(0.75, 120.0),
            _ => CollectionStrategy::blockwise(0.75, 120.0),
        };
        let wide = image_count(&scene, &s, seed).unwrap();
        let narrow = image_count(&scene, &s.with_unit_angle_deg(60.0), seed).unwrap();
        prop_assert_eq!(narrow, 2 * wide);
    }

    #[test]
    fn augmentation_respects_vocabulary(seed in any::<u64>(), factor in 1usize..5) {
        let scenes: Vec<Scene> = (0..4u64)
            .map(|i| generate_synthetic_scene(&SceneGenSpec::for_room(RoomType::ALL[i as usize], Catalog::bundled()), seed ^ i).unwrap())
            .collect();
        let out = expand_scenes(&scenes, factor, 0.5, seed).unwrap();
        prop_assert_eq!(out.len(), scenes.len() * factor);
        for (i, v) in out.iter().enumerate() {
            let src = &scenes[i / factor];
            prop_assert_eq!(v.room_type, src.room_type);
            prop_assert_eq!(v.objects.len(), src.objects.len());
            let vocab = ground_truth_object_list(src);
            for (o, p) in v.objects.iter().zip(&src.objects) {
                prop_assert_eq!(o.position, p.position);
                // one scene per room type, so the vocabulary is its own list
                prop_assert!(vocab.contains(&o.class_name));
            }
        }
    }

    #[test]
    fn split_partitions(seed in any::<u64>(), n in 2usize..40) {
        let scenes: Vec<Scene> = (0..n as u64)
            .map(|i| generate_synthetic_scene(&SceneGenSpec::for_room(RoomType::ALL[(i % 4) as usize], Catalog::bundled()), i).unwrap())
            .collect();
        let (train, eval) = split_scenes(&scenes, 0.8, seed).unwrap();
        prop_assert_eq!(train.len() + eval.len(), n);
        let mut ids: Vec<&str> = train.iter().chain(&eval).map(|s| s.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
    }
}
