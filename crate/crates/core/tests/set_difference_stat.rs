//! The quantity that limits edit robustness is the size of the symmetric
//! difference between the images of two index sets under a balanced map
//! psi. For set pairs whose sizes and overlap match what the encoder and
//! a budgeted channel produce, the difference must stay clearly below
//! n (1/2 - p/5 + 23 eps); this samples psi and checks the worst draw.
//!
//! The fiber size here (512) is far above the fourth root of n, which a
//! formal tail bound would demand; at this scale the margin is wide
//! enough that 300 draws per configuration leave no doubt.

use prc_core::prc_indexing::sample_balanced_map;
use prc_core::seed::Seed;

const N: u32 = 2048;
const RHO: u32 = 512;
const EPS: f64 = 1.0 / 64.0;
const P: f64 = 0.1;

fn image_difference(psi: &[u32], z1: &[u32], z2: &[u32]) -> usize {
    let mut in1 = vec![false; N as usize];
    let mut in2 = vec![false; N as usize];
    for &a in z1 {
        in1[psi[a as usize] as usize] = true;
    }
    for &a in z2 {
        in2[psi[a as usize] as usize] = true;
    }
    in1.iter().zip(&in2).filter(|(a, b)| a != b).count()
}

/// First `k` multiples of a stride coprime to q, a fixed scattered set.
fn scattered(k: usize, stride: u64, offset: u64) -> Vec<u32> {
    let q = u64::from(N) * u64::from(RHO);
    (0..k as u64)
        .map(|i| ((offset + i * stride) % q) as u32)
        .collect()
}

#[test]
fn image_difference_stays_under_the_bound() {
    // Z1 plays the encoder's index set: about ln(2) n distinct symbols.
    // The three Z2 shapes cover a light edit, a heavy edit that leaves
    // only the minimum overlap p n, and a Z2 at its size cap.
    let z1_len = (f64::from(N) * std::f64::consts::LN_2).round() as usize;
    let z2_cap = (f64::from(N) * (2.0 * std::f64::consts::LN_2 + EPS)).floor() as usize;
    let min_overlap = (f64::from(N) * P).ceil() as usize;
    let z1 = scattered(z1_len, 7919, 0);

    let light: Vec<u32> = z1[100..]
        .iter()
        .copied()
        .chain(
            scattered(200, 104729, 3)
                .into_iter()
                .filter(|a| !z1.contains(a))
                .take(150),
        )
        .collect();
    let heavy: Vec<u32> = z1[..min_overlap]
        .iter()
        .copied()
        .chain(
            scattered(z2_cap, 104729, 3)
                .into_iter()
                .filter(|a| !z1.contains(a)),
        )
        .take(z2_cap)
        .collect();
    let capped: Vec<u32> = z1
        .iter()
        .copied()
        .chain(
            scattered(z2_cap, 104729, 3)
                .into_iter()
                .filter(|a| !z1.contains(a)),
        )
        .take(z2_cap)
        .collect();

    let bound = f64::from(N) * (0.5 - P / 5.0 + 23.0 * EPS);
    let master = Seed::labeled(71, "set-difference");
    for (name, z2) in [("light", &light), ("heavy", &heavy), ("capped", &capped)] {
        let overlap = z2.iter().filter(|a| z1.contains(a)).count();
        assert!(
            overlap >= min_overlap,
            "{name}: overlap {overlap} below {min_overlap}"
        );
        assert!(
            z2.len() <= z2_cap,
            "{name}: {} symbols over the cap",
            z2.len()
        );

        let mut worst = 0usize;
        for draw in 0..300u64 {
            let psi = sample_balanced_map(N, RHO, &master.split_index(name, draw));
            worst = worst.max(image_difference(&psi, &z1, z2));
        }
        assert!(
            (worst as f64) < bound,
            "{name}: worst difference {worst} reached the bound {bound:.0}"
        );
    }
}
