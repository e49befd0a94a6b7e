//! Frozen existence-probability trajectory of the grid Bernoulli filter on
//! the scripted scalar scenario, and the particle tracker's agreement with
//! it.

// Frozen values are kept at full round-trip precision.
#![allow(clippy::excessive_precision)]

use bptrack::evaluation::{bernoulli_oracle, Grid, LinearScenario};

/// Grid recursion output (2000 cells on [-50, 50]), cross-checked against an
/// exact Gaussian-mixture filter over the first steps.
const EXISTENCE: [f64; 50] = [
    5.23560209424084582e-3,
    5.75456372697487253e-3,
    6.61581363740647820e-3,
    5.89214461279554628e-3,
    5.81996817949478884e-3,
    5.81277441621515321e-3,
    3.50878177459089113e-2,
    8.80432727549131447e-3,
    6.11096316199796850e-3,
    2.93368427819888589e-1,
    9.33138709286980284e-1,
    9.97123293609948558e-1,
    9.98719791259050749e-1,
    9.98331325535095515e-1,
    6.48095423914110569e-1,
    9.84535132488245868e-1,
    9.98386663181422551e-1,
    9.97980596027121414e-1,
    9.98698106564077315e-1,
    9.98709376527897819e-1,
    9.98687634361309806e-1,
    6.49595562122414538e-1,
    1.47993276034976418e-1,
    8.52294435919741966e-1,
    9.92373689758100475e-1,
    9.98175964924230996e-1,
    9.98737276534685692e-1,
    9.98804024193952755e-1,
    9.98108328248236254e-1,
    9.98660232390509384e-1,
    9.98704720878690666e-1,
    9.98712265460236392e-1,
    6.49699483547739542e-1,
    9.82012356025565913e-1,
    9.98358638162040624e-1,
    9.98417065446324581e-1,
    9.98295253969414320e-1,
    9.98753824738922713e-1,
    9.98786556109509616e-1,
    9.98195124817634394e-1,
    6.47523550979225204e-1,
    2.54276151280021734e-1,
    3.72276389877084085e-2,
    9.02906106354751589e-3,
    6.13347951854904035e-3,
    5.84402825237565794e-3,
    9.94532753669636997e-3,
    6.22537098917041141e-3,
    7.05672036674783593e-2,
    1.26426102497408446e-2,
];

#[test]
fn grid_trajectory_regression() {
    let t = bernoulli_oracle(&LinearScenario::scripted(), Grid::default());
    assert!(!t.coarse);
    for (n, (a, b)) in t.existence().iter().zip(EXISTENCE).enumerate() {
        assert!((a - b).abs() < 1e-9, "step {}: {a} vs {b}", n + 1);
    }
}

#[test]
fn particle_tracker_tracks_grid_oracle() {
    let s = LinearScenario::scripted();
    let pe = s.track_existence(3000, 17).unwrap();
    for (n, (a, b)) in pe.iter().zip(EXISTENCE).enumerate() {
        assert!((a - b).abs() < 0.05, "step {}: {a} vs {b}", n + 1);
    }
}
