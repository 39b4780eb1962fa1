use crate::qcore::{Circuit, GateKind, StateVector};
use crate::Result;

const ZERO_ANGLE: f64 = 1e-12;

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Appends a uniformly controlled rotation: for control pattern `h`
/// (bit `j` = value of `controls[j]`) the target sees `kind(angles[h])`.
///
/// Uses `2^k` rotations and `2^k` CNOTs in Gray-code order.
fn push_uniformly_controlled(
    c: &mut Circuit,
    kind: GateKind,
    controls: &[usize],
    target: usize,
    angles: &[f64],
) -> Result<()> {
    if angles.iter().all(|a| a.abs() < ZERO_ANGLE) {
        return Ok(());
    }
    let k = controls.len();
    let size = 1usize << k;
    if k == 0 {
        return c.push_fixed(kind, &[target], angles[0]);
    }
    for i in 0..size {
        let g = gray(i);
        let theta: f64 = angles
            .iter()
            .enumerate()
            .map(|(h, a)| if (h & g).count_ones().is_multiple_of(2) { *a } else { -*a })
            .sum::<f64>()
            / size as f64;
        if theta.abs() >= ZERO_ANGLE {
            c.push_fixed(kind, &[target], theta)?;
        }
        let flip = g ^ gray((i + 1) % size);
        c.push_gate(GateKind::CNOT, &[controls[flip.trailing_zeros() as usize], target])?;
    }
    Ok(())
}

/// Arithmetic state preparation: an RY tree for magnitudes followed by an RZ
/// tree for phases. Prepares `target` from `|0…0⟩` up to global phase.
pub fn mottonen_decompose(target: &StateVector) -> Result<Circuit> {
    let n = target.n_qubits();
    let amps = target.amplitudes();
    let mut c = Circuit::new(n);

    for q in (0..n).rev() {
        let controls: Vec<usize> = (q + 1..n).collect();
        let block = 1usize << q;
        let angles: Vec<f64> = (0..1usize << (n - q - 1))
            .map(|h| {
                let base = h << (q + 1);
                let p0: f64 = amps[base..base + block].iter().map(|a| a.norm_sqr()).sum();
                let p1: f64 = amps[base + block..base + 2 * block].iter().map(|a| a.norm_sqr()).sum();
                2.0 * p1.sqrt().atan2(p0.sqrt())
            })
            .collect();
        push_uniformly_controlled(&mut c, GateKind::RY, &controls, q, &angles)?;
    }

    let mut phases: Vec<f64> = amps.iter().map(|a| a.arg()).collect();
    for q in 0..n {
        let controls: Vec<usize> = (q + 1..n).collect();
        let (betas, means): (Vec<f64>, Vec<f64>) =
            phases.chunks(2).map(|p| (p[1] - p[0], 0.5 * (p[0] + p[1]))).unzip();
        push_uniformly_controlled(&mut c, GateKind::RZ, &controls, q, &betas)?;
        phases = means;
    }
    Ok(c)
}
