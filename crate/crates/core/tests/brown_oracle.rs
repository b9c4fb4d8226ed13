//! Brown waveform against values computed with 50-digit arithmetic
//! (`oracles/brown_mp.py`) and against finite differences.
#![allow(clippy::excessive_precision)]

mod common;

use common::jacobian_error;
use sse_denoise::signal_model::{brown_at, brown_waveform, sigma_c2};
use sse_denoise::{BrownConstants, BrownParams};

// sigma_c^2 at swh = 2 m
const SIGMA_C2_SWH2: f64 = 1.36965103261611843217409e-17;
// tau = 31 gates = 14.521197184375 m
const BROWN_SWH2_TAU31_PU130: [f64; 104] = [
    9.264258865931121865602369e-140,
    1.306855736514016777146433e-130,
    9.046977722255440497240369e-122,
    3.073796350163951972482047e-113,
    5.126054902103606124411862e-105,
    4.196368710605822643974892e-97,
    1.686542828405074073784796e-89,
    3.328219685910403177917608e-82,
    3.225392111698207361960699e-75,
    1.53526342351478398157079e-68,
    3.590026248742623534243951e-62,
    4.12499881747513393954384e-56,
    2.329560346156479607300709e-50,
    6.468136068690782137479018e-45,
    8.832700105096094363201164e-40,
    5.934713195733220547187783e-35,
    1.96298411086723607714799e-30,
    3.198230032401501786947126e-26,
    2.568641400591941921072177e-22,
    1.017893298642929772001301e-18,
    1.99258397900604756663624e-15,
    1.929761596876577772319081e-12,
    9.264603188609425015169835e-10,
    0.0000002210797754853739749581128,
    0.00002631974118161469247402569,
    0.001571567627368938808279771,
    0.04743962558252389498699302,
    0.7329232704078482788867995,
    5.913334405104580338138644,
    25.7895105117281984451941,
    64.60649141966776082773603,
    103.1598634547846075969444,
    122.3901215287418039366068,
    126.7806626076760547885492,
    126.6512864654149474688103,
    125.8843321406487159908167,
    125.0780948088037893036964,
    124.2755167299556433029521,
    123.4780628695631825009799,
    122.68572591164181466521,
    121.8984732393627174275249,
    121.1162722286780850741769,
    120.3390904639680466767375,
    119.566895737616135608227,
    118.7996560486764795583391,
    118.0373396015476337463085,
    117.2799148046549219350327,
    116.5273502691412326295755,
    115.7796148075662162056376,
    115.0366774326138290607069,
    114.2985073558081712265166,
    113.565073986237564225131,
    112.83634692928681629247,
    112.1122959853776224323776,
    111.3928911487170471014615,
    110.6781026060540376598875,
    109.9679007354439170561198,
    109.2622561050208045442679,
    108.5611394717779135612557,
    107.8645217803556762174641,
    107.1723741618376441788501,
    106.4846679325541160408096,
    105.8013745928934416142466,
    105.1224658261209538624591,
    104.4479134972054795435501,
    103.7776896516533799271465,
    103.1117665143500732662664,
    102.4501164884089910152329,
    101.7927121540279200925941,
    101.1395262673526837941024,
    100.4905317593481142649299,
    99.84570173467626974246793,
    99.20500947058185008129754,
    98.56842841578476437022156,
    97.93593218937980474764555,
    97.30749457974338081608525,
    96.68308954344726934918099,
    96.06269120417933427532383,
    95.44627385167117221085737,
    94.83381194063263910282474,
    94.22528008969321382639387,
    93.62065308035015486542849,
    93.01990585592340648618786,
    92.4230135205172110938479,
    91.829951337988384739451,
    91.24069473092121302102283,
    90.65521927960892489695416,
    90.07350072104170220234449,
    89.4955149479011829298537,
    88.92123800756141660572003,
    88.35064610109623035898713,
    87.78371558229296454765219,
    87.22042295667253706941144,
    86.66074488051579574694973,
    86.10465815989611843830846,
    85.55213974971822078178176,
    85.00316675276313174204439,
    84.45771641873929737981849,
    83.91576614333977352134908,
    83.37729346730546825629194,
    82.84227607549439544333139,
    82.31069179595690065195136,
    81.78251859901682121628988,
    81.25773459635854232292597,
];

fn consts() -> BrownConstants {
    BrownConstants::jason2_like()
}

#[test]
fn matches_high_precision_reference() {
    let c = consts();
    let p = BrownParams::with_tau_gates(2.0, 31.0, 130.0, &c);
    assert!((p.tau - 14.521197184375).abs() < 1e-12);
    let sc2 = sigma_c2(&p, &c);
    assert!((sc2 - SIGMA_C2_SWH2).abs() <= 1e-14 * SIGMA_C2_SWH2);

    let w = brown_waveform(&p, &c).unwrap();
    for (k, (got, want)) in w.samples().iter().zip(BROWN_SWH2_TAU31_PU130).enumerate() {
        let rel = (got - want).abs() / want;
        assert!(rel <= 1e-11, "gate {k}: {got:e} vs {want:e} (rel {rel:e})");
    }
}

#[test]
fn jacobian_matches_central_differences_on_a_grid() {
    let c = consts();
    for swh in [0.5, 1.0, 2.0, 4.0, 8.0] {
        for tau_gates in [20.0, 31.0, 45.5, 60.0] {
            for pu in [1.0, 130.0] {
                let p = BrownParams::with_tau_gates(swh, tau_gates, pu, &c);
                let rel = jacobian_error(&p, &c);
                assert!(rel <= 1e-5, "swh {swh} tau {tau_gates} pu {pu}: {rel:e}");
            }
        }
    }
}

#[test]
fn one_gate_epoch_shift_shifts_samples() {
    let c = consts();
    let a = brown_waveform(&BrownParams::with_tau_gates(3.0, 30.0, 50.0, &c), &c).unwrap();
    let b = brown_waveform(&BrownParams::with_tau_gates(3.0, 31.0, 50.0, &c), &c).unwrap();
    for k in 0..103 {
        let (x, y) = (a.samples()[k], b.samples()[k + 1]);
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300), "gate {k}");
    }
}

#[test]
fn linear_in_amplitude() {
    let c = consts();
    let one = brown_waveform(&BrownParams::with_tau_gates(2.5, 35.0, 1.0, &c), &c).unwrap();
    let many = brown_waveform(&BrownParams::with_tau_gates(2.5, 35.0, 170.0, &c), &c).unwrap();
    for (x, y) in one.samples().iter().zip(many.samples()) {
        assert!((170.0 * x - y).abs() <= 1e-13 * y.abs());
    }
}

#[test]
fn plateau_then_antenna_decay() {
    let c = consts();
    let w = brown_waveform(&BrownParams::with_tau_gates(2.0, 31.0, 130.0, &c), &c).unwrap();
    let s = w.samples();
    let peak = s.iter().copied().fold(0.0, f64::max);
    assert!(peak < 130.0 && peak > 120.0);
    // Far past the edge the ratio of successive gates is exp(−αT).
    let ratio = s[100] / s[99];
    assert!((ratio - (-c.alpha * c.gate_resolution).exp()).abs() < 1e-12);
}

#[test]
fn epoch_shift_is_a_time_shift_off_the_gates() {
    let c = consts();
    let t_gate = c.gate_resolution;
    let a = BrownParams::with_tau_gates(1.7, 28.3, 90.0, &c);
    let b = BrownParams::with_tau_gates(1.7, 29.3, 90.0, &c);
    for n in 0..4000 {
        let t = n as f64 * 0.0237 * t_gate;
        let (x, y) = (brown_at(t, &a, &c), brown_at(t + t_gate, &b, &c));
        assert!((x - y).abs() <= 1e-10 * 90.0, "t {t:e}: {x} vs {y}");
    }
}
