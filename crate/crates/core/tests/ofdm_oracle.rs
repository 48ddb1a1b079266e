mod common;

use num_complex::Complex64;

use beamalign::channel::{gen_path_set, Path, PathConfig, PathSet};
use beamalign::codebook::{gen_codebook, Codebook, CodebookParams, Owner};
use beamalign::config::{Scenario, Tx};
use beamalign::ofdm_oracle::{time_domain_rx, OfdmParams, OracleLink, PulseModel};
use beamalign::rng::{stream_rng, Stream};
use beamalign::signal::{synthesize_beacon, BeaconDims, BeaconDraws, BeaconRx, JammerProfile, ProbingMode, ProbingPlan};
use beamalign::verify::virtual_channel;
use beamalign::Error;

use common::small_scenario;

fn codebooks(s: &Scenario, q: usize, seed: u64) -> (Codebook, Codebook) {
    let cb = |owner, stream| {
        gen_codebook(owner, &CodebookParams::for_owner(&s.system, owner, q), &mut stream_rng(seed, stream), None).unwrap()
    };
    (cb(Owner::Bs, Stream::BsCodebook), cb(Owner::Ue, Stream::UeCodebook))
}

fn plan(s: &Scenario, q: usize, subcarriers: Vec<Vec<usize>>, seed: u64) -> ProbingPlan {
    let dims = BeaconDims::from_system(&s.system, q);
    ProbingPlan::new(dims, subcarriers, ProbingMode::Conventional, 0.0, &mut stream_rng(seed, Stream::KnownSymbols)).unwrap()
}

fn oracle(s: &Scenario, paths: &PathSet, bs: &Codebook, ue: &Codebook, plan: &ProbingPlan, params: &OfdmParams) -> beamalign::Result<BeaconRx> {
    let draws = BeaconDraws::from_seed(plan.dims(), 1);
    time_domain_rx(
        OracleLink { paths, codebook: bs },
        None,
        ue,
        plan,
        s.system.bs_power,
        &JammerProfile::OFF,
        0.0,
        &draws,
        params,
    )
}

fn impulse(s: &Scenario) -> OfdmParams {
    OfdmParams {
        fft_len: s.system.subcarriers,
        cp_len: s.system.cyclic_prefix,
        pulse: PulseModel::Impulse,
    }
}

fn single_path(delay_int: usize) -> PathSet {
    PathSet {
        tx: Tx::Bs,
        paths: vec![Path {
            gain: Complex64::new(0.8, -0.3),
            delay_int,
            delay_frac: 0.0,
            aod: 0.13,
            aoa: -0.27,
        }],
    }
}

#[test]
fn earlier_symbols_do_not_leak_into_later_ones() {
    let s = small_scenario();
    let (bs, ue) = codebooks(&s, 2, 3);
    let base = plan(&s, 2, s.system.subcarrier_sets(), 3);
    let d = *base.dims();
    let (slot, stream, l, symbol) = (0, 1, 2, d.symbols - 1);
    let mut known: Vec<Complex64> = (0..d.slots)
        .flat_map(|sl| (0..d.streams).flat_map(move |i| (0..d.per_stream).map(move |ll| (sl, i, ll))))
        .flat_map(|(sl, i, ll)| base.known(sl, i, ll).to_vec())
        .collect();
    known[d.tone(slot, stream, l) * d.symbols + symbol] *= Complex64::new(0.0, 1.0);
    let altered = ProbingPlan::with_symbols(d, base.subcarriers().to_vec(), ProbingMode::Conventional, 0.0, known).unwrap();

    let mut paths = single_path(3);
    paths.paths.push(Path { delay_int: 0, ..paths.paths[0].clone() });
    let a = oracle(&s, &paths, &bs, &ue, &base, &impulse(&s)).unwrap();
    let b = oracle(&s, &paths, &bs, &ue, &altered, &impulse(&s)).unwrap();
    let mut changed = 0;
    for sl in 0..d.slots {
        for i in 0..d.streams {
            for ll in 0..d.per_stream {
                for c in 0..d.chains {
                    for sym in 0..d.symbols {
                        let k = d.index(sl, i, ll, c, sym);
                        let diff = (a.samples[k] - b.samples[k]).norm();
                        if (sl, i, ll, sym) == (slot, stream, l, symbol) {
                            changed += usize::from(diff > 1e-6);
                        } else {
                            assert!(diff < 1e-13, "leak at {sl} {i} {ll} {c} {sym}: {diff}");
                        }
                    }
                }
            }
        }
    }
    assert!(changed > 0);
}

#[test]
fn one_sample_delay_is_a_linear_phase() {
    let s = small_scenario();
    let (bs, ue) = codebooks(&s, 1, 5);
    let p = plan(&s, 1, s.system.subcarrier_sets(), 5);
    let d = *p.dims();
    let a = oracle(&s, &single_path(0), &bs, &ue, &p, &impulse(&s)).unwrap();
    let b = oracle(&s, &single_path(1), &bs, &ue, &p, &impulse(&s)).unwrap();
    let f = s.system.subcarriers as f64;
    for i in 0..d.streams {
        for (l, &k) in p.subcarriers()[i].iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / f);
            for c in 0..d.chains {
                for sym in 0..d.symbols {
                    let idx = d.index(0, i, l, c, sym);
                    assert!((b.samples[idx] - a.samples[idx] * phase).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn fractional_delays_match_the_frequency_model() {
    let mut s = small_scenario();
    s.system.subcarriers = 256;
    s.system.cyclic_prefix = 72;
    s.system.symbols_per_slot = 4;
    s.system.subslot0_len = 2;
    // Tones with centered frequency inside [-0.4, 0.4].
    let subcarriers = vec![vec![1, 40, 100], vec![5, 60, 160], vec![20, 200, 250]];
    let pulse = PulseModel::default();
    let params = OfdmParams {
        fft_len: 256,
        cp_len: 72,
        pulse,
    };
    let used: Vec<usize> = subcarriers.concat();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let paths = gen_path_set(&PathConfig::from_system(&s.system, Tx::Bs).unwrap(), Tx::Bs, &mut stream_rng(seed, Stream::BsChannel));
        assert!(paths.has_fractional_delays());
        let (bs, ue) = codebooks(&s, 1, seed);
        let p = plan(&s, 1, subcarriers.clone(), seed);
        let vc = virtual_channel(&s, &paths, &used).unwrap();
        let draws = BeaconDraws::from_seed(p.dims(), 1);
        let freq = synthesize_beacon(&vc, &bs, None, &ue, &p, s.system.bs_power, &JammerProfile::OFF, 0.0, &draws).unwrap();
        let time = oracle(&s, &paths, &bs, &ue, &p, &params).unwrap();
        let scale = freq.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in freq.samples.iter().zip(&time.samples) {
            worst = worst.max((a - b).norm() / scale);
        }
    }
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn short_prefix_is_rejected() {
    let s = small_scenario();
    let (bs, ue) = codebooks(&s, 1, 9);
    let p = plan(&s, 1, s.system.subcarrier_sets(), 9);
    let params = OfdmParams {
        pulse: PulseModel::default(),
        ..impulse(&s)
    };
    let err = oracle(&s, &single_path(2), &bs, &ue, &p, &params).unwrap_err();
    assert!(matches!(err, Error::CpTooShort { needed: 65, available: 8 }), "{err:?}");
    let mut late = single_path(8);
    late.paths[0].delay_int = 9;
    assert!(matches!(
        oracle(&s, &late, &bs, &ue, &p, &impulse(&s)),
        Err(Error::CpTooShort { .. })
    ));
}

#[test]
fn impulse_pulse_refuses_fractional_paths() {
    let s = small_scenario();
    let (bs, ue) = codebooks(&s, 1, 2);
    let p = plan(&s, 1, s.system.subcarrier_sets(), 2);
    let mut paths = single_path(1);
    paths.paths[0].delay_frac = 0.25;
    assert!(oracle(&s, &paths, &bs, &ue, &p, &impulse(&s)).is_err());
}
