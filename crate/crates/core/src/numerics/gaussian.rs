use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

// AS 241 coefficients, highest degree first.
const CENTRAL_NUM: [f64; 8] = [
    2_509.080_928_730_122_7,
    33_430.575_583_588_128,
    67_265.770_927_008_7,
    45_921.953_931_549_87,
    13_731.693_765_509_461,
    1_971.590_950_306_551_4,
    133.141_667_891_784_38,
    3.387_132_872_796_366_5,
];
const CENTRAL_DEN: [f64; 8] = [
    5_226.495_278_852_546,
    28_729.085_735_721_943,
    39_307.895_800_092_71,
    21_213.794_301_586_597,
    5_394.196_021_424_751,
    687.187_007_492_057_9,
    42.313_330_701_600_91,
    1.0,
];
const INTER_NUM: [f64; 8] = [
    7.745_450_142_783_414e-4,
    0.022_723_844_989_269_184,
    0.241_780_725_177_450_6,
    1.270_458_252_452_368_4,
    3.647_848_324_763_204_5,
    5.769_497_221_460_691,
    4.630_337_846_156_545,
    1.423_437_110_749_683_5,
];
const INTER_DEN: [f64; 8] = [
    1.050_750_071_644_416_8e-9,
    5.475_938_084_995_345e-4,
    0.015_198_666_563_616_457,
    0.148_103_976_427_480_08,
    0.689_767_334_985_1,
    1.676_384_830_183_803_8,
    2.053_191_626_637_759,
    1.0,
];
const TAIL_NUM: [f64; 8] = [
    2.010_334_399_292_288e-7,
    2.711_555_568_743_487_6e-5,
    0.001_242_660_947_388_078_4,
    0.026_532_189_526_576_124,
    0.296_560_571_828_504_9,
    1.784_826_539_917_291_3,
    5.463_784_911_164_114,
    6.657_904_643_501_103,
];
const TAIL_DEN: [f64; 8] = [
    2.044_263_103_389_939_8e-15,
    1.421_511_758_316_446e-7,
    1.846_318_317_510_054_8e-5,
    7.868_691_311_456_133e-4,
    0.014_875_361_290_850_615,
    0.136_929_880_922_735_8,
    0.599_832_206_555_888,
    1.0,
];

#[inline]
fn horner(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Standard normal quantile (Wichura's AS 241, about 1e-16 relative).
///
/// Returns -inf at p = 0, +inf at p = 1 and NaN outside [0, 1].
pub fn norm_inv_cdf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&CENTRAL_NUM, r) / horner(&CENTRAL_DEN, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        horner(&INTER_NUM, r - 1.6) / horner(&INTER_DEN, r - 1.6)
    } else {
        horner(&TAIL_NUM, r - 5.0) / horner(&TAIL_DEN, r - 5.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_quantiles() {
        assert_eq!(norm_inv_cdf(0.5), 0.0);
        assert_relative_eq!(
            norm_inv_cdf(0.975),
            1.959_963_984_540_054,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            norm_inv_cdf(0.025),
            -1.959_963_984_540_054,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            norm_inv_cdf(1e-10),
            -6.361_340_902_404_056,
            max_relative = 1e-13
        );
        assert!(norm_inv_cdf(1.5).is_nan());
        assert_eq!(norm_inv_cdf(0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn round_trip() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert_relative_eq!(norm_cdf(norm_inv_cdf(p)), p, max_relative = 1e-13);
        }
        for &p in &[1e-300, 1e-100, 1e-20, 1e-8] {
            assert_relative_eq!(norm_cdf(norm_inv_cdf(p)), p, max_relative = 1e-10);
        }
    }

    #[test]
    fn cdf_symmetry() {
        for &x in &[0.1, 1.0, 2.5, 7.0] {
            assert_relative_eq!(norm_cdf(x) + norm_cdf(-x), 1.0, max_relative = 1e-15);
        }
        assert_relative_eq!(norm_pdf(0.0), 1.0 / (2.0 * PI).sqrt());
    }
}
