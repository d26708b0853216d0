//! Frozen-fixture checks: the seeded 2x2 instance must regenerate exactly
//! and its canonical JSON serialization must stay byte-stable.

use std::path::PathBuf;

use equicut::knapsack::{generate_instance, GeneratorConfig, KnapsackGameInstance};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden-instance-2x2-seed1.json")
}

#[test]
fn golden_instance_regenerates_bitwise() {
    let text = std::fs::read_to_string(golden_path()).unwrap();
    let recorded = KnapsackGameInstance::from_json_str(&text).unwrap();
    let generated = generate_instance(&GeneratorConfig::new(1, 2, 2)).unwrap();
    assert_eq!(generated, recorded);
    assert_eq!(generated.to_json_string(), text);
}

#[test]
fn golden_instance_invariants() {
    let text = std::fs::read_to_string(golden_path()).unwrap();
    let inst = KnapsackGameInstance::from_json_str(&text).unwrap();
    assert_eq!(
        (inst.players, inst.markets, inst.seed, inst.gamma),
        (2, 2, 1, 1000)
    );
    for j in 0..inst.players {
        assert_eq!(inst.b[j], *inst.a[j].iter().max().unwrap());
    }
    for l in 0..inst.markets {
        assert_eq!(
            inst.e[l],
            (0..inst.players).map(|j| inst.d[j][l]).max().unwrap()
        );
    }
}
