//! Multi-photon interference from matrix permanents: transition amplitudes
//! and a full output distribution for three photons in a random 5-mode
//! interferometer.

use chip_teleport::fock::{output_distribution, permanent, FockState};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unitary(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let gauss = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let qr = gauss.qr();
    qr.q()
}

fn main() -> chip_teleport::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    // Permanent of a small explicit matrix: per the expansion over
    // permutations, perm([[1,2],[3,4]]) = 1*4 + 2*3 = 10.
    let m = DMatrix::from_row_slice(2, 2, &[
        Complex64::new(1.0, 0.0),
        Complex64::new(2.0, 0.0),
        Complex64::new(3.0, 0.0),
        Complex64::new(4.0, 0.0),
    ]);
    println!("perm([[1,2],[3,4]]) = {}", permanent(&m)?);

    let u = random_unitary(5, &mut rng);
    let input = FockState::new(vec![1, 1, 1, 0, 0]);
    let dist = output_distribution(&u, &input, None)?;
    println!(
        "\n3 photons in a Haar-ish 5-mode interferometer: {} output patterns, total mass {:.12}",
        dist.len(),
        dist.total_mass()
    );

    let mut sorted: Vec<_> = dist.iter().map(|(s, p)| (s.clone(), p)).collect();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("five most likely patterns:");
    for (state, p) in sorted.iter().take(5) {
        println!("  {:?}  p = {:.6}", state.occupations(), p);
    }
    Ok(())
}
