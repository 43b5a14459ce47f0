use homlab::cell::{CellSolveOptions, CorrectorSet, UnitCellGrid};
use homlab::spectral::{c_of, SpectralParameter};
use homlab::tensor::{CoefficientField, Tensor};
use num_complex::Complex64;
use proptest::prelude::*;

fn spd(a: f64, b: f64, c: f64) -> Tensor {
    // [[a, b], [b, c]] with a, c > |b|
    Tensor::from_vec(2, 1, vec![a, b, b, c]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constant_field_is_its_own_homogenization(a in 1.0f64..4.0, c in 1.0f64..4.0, t in -0.9f64..0.9) {
        let tensor = spd(a, t * a.min(c), c);
        let field = CoefficientField::constant(tensor.clone()).unwrap();
        let grid = UnitCellGrid::new(2, 16).unwrap();
        let set = CorrectorSet::compute(&field, &grid, CellSolveOptions::default()).unwrap();
        prop_assert!(set.homogenized.max_abs_diff(&tensor) < 1e-10);
    }

    #[test]
    fn laminate_gives_harmonic_and_arithmetic_means(base in 1.5f64..4.0, frac in 0.0f64..0.8) {
        let amp = frac * base;
        let field = CoefficientField::laminate(2, 1, base, amp).unwrap();
        let grid = UnitCellGrid::new(2, 128).unwrap();
        let set = CorrectorSet::compute(&field, &grid, CellSolveOptions::default()).unwrap();
        let harmonic = (base * base - amp * amp).sqrt();
        prop_assert!((set.homogenized.get(0, 0, 0, 0) - harmonic).abs() / harmonic < 1e-3);
        prop_assert!((set.homogenized.get(1, 1, 0, 0) - base).abs() / base < 1e-3);
        prop_assert!(set.homogenized.asymmetry() < 1e-10);
    }

    #[test]
    fn sector_constant_is_conjugation_invariant(re in -1e3f64..1e3, im in -1e3f64..1e3) {
        prop_assume!(im != 0.0 || re <= 0.0);
        let l = SpectralParameter::new(Complex64::new(re, im)).unwrap();
        let c = c_of(&l).unwrap();
        prop_assert!(c >= 1.0);
        prop_assert!((c - c_of(&l.conj()).unwrap()).abs() <= 1e-14 * c);
    }
}
