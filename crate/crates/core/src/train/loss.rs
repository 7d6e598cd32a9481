//! Training losses, in plain-array form (tests, reporting) and as tape
//! builders (optimization). The tape builders must agree with the plain
//! forms; a test pins that.

use crate::autodiff::{Array, Tape, Tensor};
use crate::error::{Error, Result};
use crate::geom::ContactPointSet;

fn check_same_shape(op: &'static str, a: &Array, b: &Array) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

/// Mean squared difference over every entry of two map volumes.
pub fn loss_map(gt: &Array, pred: &Array) -> Result<f64> {
    check_same_shape("loss_map", gt, pred)?;
    let mut acc = 0.0;
    for (a, b) in gt.data().iter().zip(pred.data()) {
        let d = a - b;
        acc += d * d;
    }
    Ok(acc / gt.len() as f64)
}

/// Mean over frames of the squared Euclidean distance between roots
/// (`[T, 3]`).
pub fn loss_root(gt: &Array, pred: &Array) -> Result<f64> {
    check_same_shape("loss_root", gt, pred)?;
    if gt.rank() != 2 || gt.shape()[1] != 3 {
        return Err(Error::InvalidInput(format!(
            "loss_root expects [T, 3], got {:?}",
            gt.shape()
        )));
    }
    let t = gt.shape()[0];
    let mut acc = 0.0;
    for (a, b) in gt.data().iter().zip(pred.data()) {
        let d = a - b;
        acc += d * d;
    }
    Ok(acc / t as f64)
}

/// Mean over frames and joints of squared per-joint distances
/// (`[T, J-1, 3]`).
pub fn loss_local(gt: &Array, pred: &Array) -> Result<f64> {
    check_same_shape("loss_local", gt, pred)?;
    if gt.rank() != 3 || gt.shape()[2] != 3 {
        return Err(Error::InvalidInput(format!(
            "loss_local expects [T, J-1, 3], got {:?}",
            gt.shape()
        )));
    }
    let denom = (gt.shape()[0] * gt.shape()[1]) as f64;
    let mut acc = 0.0;
    for (a, b) in gt.data().iter().zip(pred.data()) {
        let d = a - b;
        acc += d * d;
    }
    Ok(acc / denom)
}

/// Contact prior: squared distance between each predicted global joint and
/// its contact point, counted only where the indicator is 1, averaged over
/// all T*J slots.
pub fn loss_contact(pred_global: &Array, contacts: &ContactPointSet) -> Result<f64> {
    let q = contacts.entries();
    if pred_global.rank() != 3
        || pred_global.shape()[0] != q.shape()[0]
        || pred_global.shape()[1] != q.shape()[1]
        || pred_global.shape()[2] != 3
    {
        return Err(Error::shape("loss_contact", pred_global.shape(), q.shape()));
    }
    let (t, j) = (q.shape()[0], q.shape()[1]);
    let mut acc = 0.0;
    for ti in 0..t {
        for ji in 0..j {
            let flag = q.at(&[ti, ji, 3]);
            if flag == 0.0 {
                continue;
            }
            let mut d2 = 0.0;
            for c in 0..3 {
                let d = pred_global.at(&[ti, ji, c]) - q.at(&[ti, ji, c]);
                d2 += d * d;
            }
            acc += flag * d2;
        }
    }
    Ok(acc / (t * j) as f64)
}

/// Weighted sum of the three motion-loss components.
pub fn loss_motion(root: f64, local: f64, contact: f64, lambdas: (f64, f64, f64)) -> f64 {
    lambdas.0 * root + lambdas.1 * local + lambdas.2 * contact
}

pub fn loss_map_tape(pred: &Tensor, gt: &Tensor) -> Result<Tensor> {
    if pred.shape() != gt.shape() {
        return Err(Error::shape("loss_map", &pred.shape(), &gt.shape()));
    }
    Ok(pred.sub(gt)?.square().mean_all())
}

pub fn loss_root_tape(pred: &Tensor, gt: &Tensor) -> Result<Tensor> {
    if pred.shape() != gt.shape() {
        return Err(Error::shape("loss_root", &pred.shape(), &gt.shape()));
    }
    pred.sub(gt)?.square().sum_axis(1)?.mean_axis(0)
}

pub fn loss_local_tape(pred: &Tensor, gt: &Tensor) -> Result<Tensor> {
    if pred.shape() != gt.shape() {
        return Err(Error::shape("loss_local", &pred.shape(), &gt.shape()));
    }
    Ok(pred.sub(gt)?.square().sum_axis(2)?.mean_all())
}

/// `pred_global`: `[T, J, 3]` on the tape; contact coordinates and flags are
/// constants.
pub fn loss_contact_tape(
    tape: &Tape,
    pred_global: &Tensor,
    contacts: &ContactPointSet,
) -> Result<Tensor> {
    let q = contacts.entries();
    let shape = pred_global.shape();
    if shape[0] != q.shape()[0] || shape[1] != q.shape()[1] || shape[2] != 3 {
        return Err(Error::shape("loss_contact", &shape, q.shape()));
    }
    let coords = tape.constant(q.slice(2, 0, 3)?);
    let flags = tape.constant(q.slice(2, 3, 1)?.reshape(&[shape[0], shape[1]])?);
    let d2 = pred_global.sub(&coords)?.square().sum_axis(2)?;
    Ok(d2.mul(&flags)?.mean_all())
}

pub fn loss_motion_tape(
    root: &Tensor,
    local: &Tensor,
    contact: &Tensor,
    lambdas: (f64, f64, f64),
) -> Result<Tensor> {
    root.scale(lambdas.0)
        .add(&local.scale(lambdas.1))?
        .add(&contact.scale(lambdas.2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_loss_examples() {
        let gt = Array::full(&[2, 3, 4], 0.5);
        assert_eq!(loss_map(&gt, &gt).unwrap(), 0.0);
        let pred = gt.map(|v| v + 0.1);
        assert!((loss_map(&gt, &pred).unwrap() - 0.01).abs() < 1e-12);
        // single differing entry delta in K entries -> delta^2 / K
        let mut one_off = gt.clone();
        one_off.data_mut()[5] += 0.3;
        assert!((loss_map(&gt, &one_off).unwrap() - 0.09 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn root_loss_examples() {
        let gt = Array::zeros(&[4, 3]);
        assert_eq!(loss_root(&gt, &gt).unwrap(), 0.0);
        let mut pred = Array::zeros(&[4, 3]);
        for t in 0..4 {
            pred.set(&[t, 0], 3.0);
            pred.set(&[t, 1], 4.0);
        }
        assert!((loss_root(&gt, &pred).unwrap() - 25.0).abs() < 1e-12);
        // T = 1 reduces to one squared norm
        let g1 = Array::zeros(&[1, 3]);
        let p1 = Array::from_vec(&[1, 3], vec![1.0, 2.0, 2.0]).unwrap();
        assert!((loss_root(&g1, &p1).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn local_loss_examples() {
        let gt = Array::zeros(&[2, 3, 3]);
        assert_eq!(loss_local(&gt, &gt).unwrap(), 0.0);
        let mut pred = Array::zeros(&[2, 3, 3]);
        for t in 0..2 {
            for j in 0..3 {
                pred.set(&[t, j, 0], 3.0);
                pred.set(&[t, j, 1], 4.0);
            }
        }
        assert!((loss_local(&gt, &pred).unwrap() - 25.0).abs() < 1e-12);
        let g1 = Array::zeros(&[1, 1, 3]);
        let p1 = Array::from_vec(&[1, 1, 3], vec![0.0, 0.0, 2.0]).unwrap();
        assert!((loss_local(&g1, &p1).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn contact_loss_examples() {
        // all indicators zero -> 0
        let q = ContactPointSet::zeros(2, 3);
        let pred = Array::full(&[2, 3, 3], 7.0);
        assert_eq!(loss_contact(&pred, &q).unwrap(), 0.0);

        // one in-contact joint offset by (0,0,2), T*J = 6 -> 4/6
        let mut e = Array::zeros(&[2, 3, 4]);
        e.set(&[1, 2, 0], 1.0);
        e.set(&[1, 2, 1], 1.0);
        e.set(&[1, 2, 2], 1.0);
        e.set(&[1, 2, 3], 1.0);
        let q = ContactPointSet::new(e).unwrap();
        let mut pred = Array::zeros(&[2, 3, 3]);
        pred.set(&[1, 2, 0], 1.0);
        pred.set(&[1, 2, 1], 1.0);
        pred.set(&[1, 2, 2], 3.0);
        assert!((loss_contact(&pred, &q).unwrap() - 4.0 / 6.0).abs() < 1e-12);

        // predicted joints exactly on contact points -> 0
        pred.set(&[1, 2, 2], 1.0);
        assert_eq!(loss_contact(&pred, &q).unwrap(), 0.0);
    }

    #[test]
    fn motion_loss_weighted_sum() {
        assert_eq!(loss_motion(0.0, 0.0, 0.0, (1.0, 1.0, 0.1)), 0.0);
        assert!((loss_motion(2.0, 3.0, 10.0, (1.0, 1.0, 0.1)) - 6.0).abs() < 1e-12);
        assert!((loss_motion(2.0, 3.0, 10.0, (1.0, 1.0, 0.0)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn tape_losses_match_plain() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let gt = Array::uniform(&[3, 2, 3], -1.0, 1.0, &mut rng);
        let pred = Array::uniform(&[3, 2, 3], -1.0, 1.0, &mut rng);
        let tape = Tape::new();
        let pt = tape.constant(pred.clone());
        let gtt = tape.constant(gt.clone());
        let lm = loss_map_tape(&pt, &gtt).unwrap().value().item();
        assert!((lm - loss_map(&gt, &pred).unwrap()).abs() < 1e-12);
        let ll = loss_local_tape(&pt, &gtt).unwrap().value().item();
        assert!((ll - loss_local(&gt, &pred).unwrap()).abs() < 1e-12);

        let groots = Array::uniform(&[4, 3], -1.0, 1.0, &mut rng);
        let proots = Array::uniform(&[4, 3], -1.0, 1.0, &mut rng);
        let gr = tape.constant(groots.clone());
        let pr = tape.constant(proots.clone());
        let lr = loss_root_tape(&pr, &gr).unwrap().value().item();
        assert!((lr - loss_root(&groots, &proots).unwrap()).abs() < 1e-12);

        let mut e = Array::zeros(&[3, 2, 4]);
        e.set(&[0, 1, 0], 0.5);
        e.set(&[0, 1, 3], 1.0);
        e.set(&[2, 0, 2], -0.25);
        e.set(&[2, 0, 3], 1.0);
        let q = ContactPointSet::new(e).unwrap();
        let lc = loss_contact_tape(&tape, &pt, &q).unwrap().value().item();
        assert!((lc - loss_contact(&pred, &q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Array::zeros(&[2, 3]);
        let b = Array::zeros(&[3, 3]);
        assert!(loss_map(&a, &b).is_err());
        assert!(loss_root(&a, &b).is_err());
    }
}
