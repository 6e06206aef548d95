//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The panel with the largest `|K15 − G7|` is bisected until the summed
//! estimate drops below `max(abs_tol, rel_tol · |I|)`. Panels are processed in
//! a fixed order, so results are bit-reproducible.

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_panels: 4000,
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
    pub evaluations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("no convergence after {panels} panels (value {value}, error {error:.3e})")]
    NotConverged { value: f64, error: f64, panels: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError<E> {
    #[error("integrand failed: {0}")]
    Integrand(E),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod_panel<E>(
    f: &mut impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
) -> Result<Panel, IntegrateError<E>> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| -> Result<f64, IntegrateError<E>> {
        let y = f(x).map_err(IntegrateError::Integrand)?;
        if !y.is_finite() {
            return Err(QuadError::NonFinite { x }.into());
        }
        Ok(y)
    };
    let fc = eval(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = eval(center - dx)? + eval(center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Integrates a fallible integrand over `[a, b]`.
pub fn integrate_with<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult, IntegrateError<E>> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            panels: 0,
            evaluations: 0,
        });
    }
    let mut panels = vec![kronrod_panel(&mut f, a, b)?];
    let mut evaluations = 15;
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let target = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= target {
            return Ok(QuadResult {
                value,
                error_estimate: error,
                panels: panels.len(),
                evaluations,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .fold(0, |wi, (i, p)| if p.error > panels[wi].error { i } else { wi });
        let p = panels[worst];
        let mid = 0.5 * (p.a + p.b);
        let resolvable = mid > p.a.min(p.b) && mid < p.a.max(p.b);
        if panels.len() >= cfg.max_panels || !resolvable {
            return Err(QuadError::NotConverged {
                value,
                error,
                panels: panels.len(),
            }
            .into());
        }
        panels[worst] = kronrod_panel(&mut f, p.a, mid)?;
        panels.insert(worst + 1, kronrod_panel(&mut f, mid, p.b)?);
        evaluations += 30;
    }
}

/// Integrates an infallible integrand.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult, QuadError> {
    integrate_with(|x| Ok::<f64, std::convert::Infallible>(f(x)), a, b, cfg).map_err(|e| match e {
        IntegrateError::Quadrature(q) => q,
        IntegrateError::Integrand(never) => match never {},
    })
}
