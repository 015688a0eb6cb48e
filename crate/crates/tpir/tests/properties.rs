//! Property tests over randomly drawn configurations: parameter identities,
//! retrieval round trips, and query-shape invariants.

use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use tpir::field::{FieldMatrix, PrimeField};
use tpir::params::{capacity, derive_params, optimal_subpacketization, SchemeConfig};
use tpir::scheme::{answer, build_schedule, decode, generate_queries, Database};
use tpir::verify::measure_rate;

fn configs() -> impl Strategy<Value = SchemeConfig> {
    (2usize..=6, 2usize..=4)
        .prop_flat_map(|(n, m)| (Just(n), 1usize..n, Just(m)))
        .prop_map(|(n, t, m)| SchemeConfig::new(n, t, m).expect("valid by construction"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parameter_identities(config in configs()) {
        let p = derive_params(config).unwrap();
        // L is the optimal sub-packetization and D follows from the rate
        prop_assert_eq!(p.sub_packetization, optimal_subpacketization(config).unwrap());
        prop_assert_eq!(
            Ratio::new(p.sub_packetization as u128, p.download as u128),
            capacity(config).unwrap()
        );
        // per-server downloads add up to D
        let total: usize = (0..config.servers).map(|j| p.gamma(j)).sum();
        prop_assert_eq!(total, p.download);
        // schedule agrees with the closed-form counts
        let schedule = build_schedule(&p).unwrap();
        prop_assert_eq!(schedule.slots.len(), p.download);
        prop_assert_eq!(measure_rate(&p, &schedule), capacity(config).unwrap());
    }

    #[test]
    fn retrieval_round_trips(
        config in configs(),
        theta_pick in any::<u32>(),
        seed in any::<u64>(),
        stripes in 1usize..=3,
    ) {
        // cap the work per case; large instances are covered by the grid
        prop_assume!(optimal_subpacketization(config).unwrap() <= 27);
        let p = derive_params(config).unwrap();
        let theta = theta_pick as usize % config.records;
        let field = PrimeField::new(p.q_min).unwrap();
        let schedule = build_schedule(&p).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let db = Database::random(field, config.records, p.sub_packetization, stripes, &mut rng)
            .unwrap();
        let qs = generate_queries(&schedule, field, theta, &mut rng).unwrap();

        // every server's query matrix has its scheduled shape
        for j in 0..config.servers {
            prop_assert_eq!(qs.matrices[j].rows(), config.records * p.sub_packetization);
            prop_assert_eq!(qs.matrices[j].cols(), p.gamma(j));
        }

        let answers: Vec<FieldMatrix> = (0..config.servers)
            .map(|j| answer(&db, &qs.matrices[j]).unwrap())
            .collect();
        let got = decode(&schedule, field, &qs.mix, &answers).unwrap();
        prop_assert_eq!(&got, db.record(theta));
    }

    #[test]
    fn answers_are_linear_in_the_database(config in configs(), seed in any::<u64>()) {
        prop_assume!(optimal_subpacketization(config).unwrap() <= 16);
        let p = derive_params(config).unwrap();
        let field = PrimeField::new(p.q_min).unwrap();
        let schedule = build_schedule(&p).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let db1 = Database::random(field, config.records, p.sub_packetization, 2, &mut rng).unwrap();
        let db2 = Database::random(field, config.records, p.sub_packetization, 2, &mut rng).unwrap();
        let sum = Database::new(
            field,
            (0..config.records)
                .map(|i| db1.record(i).add(db2.record(i)).unwrap())
                .collect(),
        )
        .unwrap();
        let qs = generate_queries(&schedule, field, 0, &mut rng).unwrap();
        for j in 0..config.servers {
            let a1 = answer(&db1, &qs.matrices[j]).unwrap();
            let a2 = answer(&db2, &qs.matrices[j]).unwrap();
            let a_sum = answer(&sum, &qs.matrices[j]).unwrap();
            prop_assert_eq!(a_sum, a1.add(&a2).unwrap());
        }
    }
}
