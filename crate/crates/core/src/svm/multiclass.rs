use serde::{Deserialize, Serialize};

use super::SvmError;

pub trait BinaryClassifier {
    fn margin(&self, x: &[f64]) -> Result<f64, SvmError>;
}

/// One class-vs-rest head per class present in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsAll<M> {
    pub classes: Vec<usize>,
    pub heads: Vec<M>,
}

impl<M: BinaryClassifier> OneVsAll<M> {
    /// `fit_head` receives `+1` for the head's class and `-1` for the rest.
    pub fn fit<F>(labels: &[usize], mut fit_head: F) -> Result<Self, SvmError>
    where
        F: FnMut(&[f64]) -> Result<M, SvmError>,
    {
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(SvmError::DegenerateData("one-vs-all needs at least two classes".into()));
        }
        let heads = classes
            .iter()
            .map(|&c| {
                let ys: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
                fit_head(&ys)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OneVsAll { classes, heads })
    }

    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>, SvmError> {
        self.heads.iter().map(|h| h.margin(x)).collect()
    }

    /// Class with the largest margin; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize, SvmError> {
        let margins = self.margins(x)?;
        Ok(self.classes[argmax_first(&margins)])
    }
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::{svm_fit, KernelSpec, SvmModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixed(f64);

    impl BinaryClassifier for Fixed {
        fn margin(&self, _: &[f64]) -> Result<f64, SvmError> {
            Ok(self.0)
        }
    }

    #[test]
    fn ties_go_to_the_lowest_class() {
        let ova = OneVsAll { classes: vec![0, 1, 2], heads: vec![Fixed(0.2), Fixed(0.7), Fixed(0.7)] };
        assert_eq!(ova.predict(&[]).unwrap(), 1);
        let ova = OneVsAll { classes: vec![0, 1, 2], heads: vec![Fixed(0.5), Fixed(0.5), Fixed(0.5)] };
        assert_eq!(ova.predict(&[]).unwrap(), 0);
    }

    #[test]
    fn three_blobs_are_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let centres = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)];
        let mut xs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..45 {
            let (cx, cy) = centres[i % 3];
            xs.push(vec![cx + rng.gen_range(-0.7..0.7), cy + rng.gen_range(-0.7..0.7)]);
            labels.push(i % 3);
        }
        let ova: OneVsAll<SvmModel> = OneVsAll::fit(&labels, |ys| svm_fit(&xs, ys, KernelSpec::rbf(0.5), 100.0)).unwrap();
        for (x, l) in xs.iter().zip(&labels) {
            assert_eq!(ova.predict(x).unwrap(), *l);
        }
        assert!(OneVsAll::<SvmModel>::fit(&[1, 1], |ys| svm_fit(&xs[..2], ys, KernelSpec::rbf(0.5), 1.0)).is_err());
    }

    #[test]
    fn binary_one_vs_all_matches_a_single_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let xs: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            let labels: Vec<usize> = xs.iter().map(|x| (x[0] + 0.3 * x[1] > 0.0) as usize).collect();
            if labels.iter().all(|&l| l == labels[0]) {
                continue;
            }
            let ys: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
            let single = svm_fit(&xs, &ys, KernelSpec::rbf(1.0), 10.0).unwrap();
            let ova: OneVsAll<SvmModel> = OneVsAll::fit(&labels, |ys| svm_fit(&xs, ys, KernelSpec::rbf(1.0), 10.0)).unwrap();
            for _ in 0..100 {
                let x = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let m = single.margin(&x).unwrap();
                if m.abs() < 1e-6 {
                    continue;
                }
                assert_eq!(ova.predict(&x).unwrap(), (m >= 0.0) as usize);
            }
        }
    }
}
