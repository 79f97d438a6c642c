//! JSON documents for models, kernels, estimation families and run configs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use locstat_core::curve::{ParameterCurve, Table};
use locstat_core::qmle::{ArMean, ArchVolatility, ExpAr, LikelihoodSpec};
use locstat_core::{make_builtin, Error, Extras, FamilyKind, InnovationLaw, KernelFamily, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveDoc {
    Const { value: f64 },
    /// `c_0 + c_1 u + ...`
    Poly { coeffs: Vec<f64> },
    /// Linear interpolation; the grid defaults to uniform on [0, 1].
    Table {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<Vec<f64>>,
    },
}

impl CurveDoc {
    pub fn build(&self) -> locstat_core::Result<ParameterCurve> {
        Ok(match self {
            CurveDoc::Const { value } => ParameterCurve::constant(*value),
            CurveDoc::Poly { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::Invalid { field: "curves.coeffs", reason: "need at least one coefficient".into() });
                }
                ParameterCurve::poly(coeffs.clone())
            }
            CurveDoc::Table { values, grid: None } => ParameterCurve::Table(Table::uniform(values.clone())?),
            CurveDoc::Table { values, grid: Some(g) } => ParameterCurve::Table(Table::new(g.clone(), values.clone())?),
        })
    }

    pub fn constant(value: f64) -> Self {
        CurveDoc::Const { value }
    }

    pub fn poly(coeffs: &[f64]) -> Self {
        CurveDoc::Poly { coeffs: coeffs.to_vec() }
    }

    /// Value at `u`, for oracles in experiment configs.
    pub fn eval(&self, u: f64) -> locstat_core::Result<f64> {
        Ok(self.build()?.eval(u))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub family: FamilyKind,
    pub curves: Vec<CurveDoc>,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub innovation: InnovationLaw,
    /// The scalar `a0` of tvExpAR(1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    /// Declared contraction weights; must dominate the ones computed from the curves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<Vec<f64>>,
}

fn default_q() -> f64 {
    2.0
}

impl ModelDoc {
    pub fn build(&self) -> locstat_core::Result<ModelSpec> {
        let curves = self.curves.iter().map(CurveDoc::build).collect::<locstat_core::Result<Vec<_>>>()?;
        let extras = Extras { innovation: self.innovation, q: Some(self.q), expar_a0: self.a0 };
        let model = make_builtin(self.family, curves, extras)?;
        if let Some(declared) = &self.chi {
            let computed = model.chi();
            if declared.len() != computed.len() {
                return Err(Error::Invalid { field: "model.chi", reason: format!("expected {} weights", computed.len()) });
            }
            if let Some(i) = declared.iter().zip(computed).position(|(d, c)| *d < *c) {
                return Err(Error::Invalid {
                    field: "model.chi",
                    reason: format!("declared chi_{} = {} is below the computed bound {}", i + 1, declared[i], computed[i]),
                });
            }
        }
        Ok(model)
    }

    /// tvAR(1) with `a(u) = coeffs(u)` and unit scale.
    pub fn ar1(coeffs: &[f64]) -> Self {
        ModelDoc {
            family: FamilyKind::TvAr,
            curves: vec![CurveDoc::poly(coeffs), CurveDoc::constant(1.0)],
            q: 2.0,
            innovation: InnovationLaw::standard_gaussian(),
            a0: None,
            chi: None,
        }
    }

    /// tvARCH(1) with constant `a_0` and polynomial `a_1`.
    pub fn arch1(a0: f64, a1: &[f64]) -> Self {
        ModelDoc {
            family: FamilyKind::TvArch,
            curves: vec![CurveDoc::constant(a0), CurveDoc::poly(a1)],
            q: 2.0,
            innovation: InnovationLaw::standard_gaussian(),
            a0: None,
            chi: None,
        }
    }

    /// tvExpAR(1) with scalar `a0` and polynomial `theta`.
    pub fn expar(a0: f64, theta: &[f64]) -> Self {
        ModelDoc {
            family: FamilyKind::TvExpAr,
            curves: vec![CurveDoc::poly(theta)],
            q: 2.0,
            innovation: InnovationLaw::standard_gaussian(),
            a0: Some(a0),
            chi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimationDoc {
    /// `mu = sum theta_i y_i`, constant `sigma`.
    Ar {
        p: usize,
        #[serde(default = "one")]
        sigma: f64,
        theta_box: Vec<[f64; 2]>,
        #[serde(default = "default_floor")]
        sigma_floor: f64,
    },
    /// `sigma^2 = theta_0 + sum theta_i y_i^2`.
    Arch {
        p: usize,
        theta_box: Vec<[f64; 2]>,
        #[serde(default = "default_floor")]
        sigma_floor: f64,
    },
    /// `mu = a0 exp(-theta y^2) y`.
    Expar {
        a0: f64,
        theta_box: Vec<[f64; 2]>,
        #[serde(default = "default_floor")]
        sigma_floor: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_floor() -> f64 {
    1e-6
}

impl EstimationDoc {
    pub fn build(&self) -> locstat_core::Result<LikelihoodSpec> {
        let boxes = |b: &Vec<[f64; 2]>| b.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>();
        match self {
            EstimationDoc::Ar { p, sigma, theta_box, sigma_floor } => {
                LikelihoodSpec::new(Arc::new(ArMean { p: *p, sigma: *sigma }), boxes(theta_box), *sigma_floor)
            }
            EstimationDoc::Arch { p, theta_box, sigma_floor } => {
                LikelihoodSpec::new(Arc::new(ArchVolatility { p: *p }), boxes(theta_box), *sigma_floor)
            }
            EstimationDoc::Expar { a0, theta_box, sigma_floor } => {
                LikelihoodSpec::new(Arc::new(ExpAr { a0: *a0 }), boxes(theta_box), *sigma_floor)
            }
        }
    }
}

/// Pointwise transformation applied to a series before localization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    Square,
    Abs,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Square => x * x,
            Transform::Abs => x.abs(),
        }
    }
}

/// `b = scale * n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthRule {
    pub scale: f64,
    pub exponent: f64,
}

impl BandwidthRule {
    pub const CUBE_ROOT: BandwidthRule = BandwidthRule { scale: 1.0, exponent: -1.0 / 3.0 };

    pub fn at(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(self.exponent)
    }
}

pub fn kernel_name(k: KernelFamily) -> &'static str {
    match k {
        KernelFamily::Rectangular => "rectangular",
        KernelFamily::Epanechnikov => "epanechnikov",
        KernelFamily::Triangular => "triangular",
        KernelFamily::OneSided => "one_sided",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_doc_round_trip() {
        let doc = ModelDoc::arch1(0.2, &[0.0, 0.0, 0.95]);
        let s = serde_json::to_string(&doc).unwrap();
        let back: ModelDoc = serde_json::from_str(&s).unwrap();
        assert_eq!(doc, back);
        assert!((back.build().unwrap().chi()[0] - 0.95f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn declared_chi_must_dominate() {
        let mut doc = ModelDoc::ar1(&[0.5]);
        doc.chi = Some(vec![0.4]);
        assert!(matches!(doc.build(), Err(Error::Invalid { field: "model.chi", .. })));
        doc.chi = Some(vec![0.6]);
        assert!(doc.build().is_ok());
    }

    #[test]
    fn parses_documented_schema() {
        let doc: ModelDoc = serde_json::from_str(
            r#"{"family":"tvExpAR","a0":0.8,"curves":[{"kind":"const","value":0.5}],
                "innovation":{"family":"student_t","dof":8,"scale":1}}"#,
        )
        .unwrap();
        assert_eq!(doc.build().unwrap().name(), "tvExpAR");
        let table: CurveDoc = serde_json::from_str(r#"{"kind":"table","values":[0,1,0]}"#).unwrap();
        assert_eq!(table.eval(0.5).unwrap(), 1.0);
        assert!(serde_json::from_str::<CurveDoc>(r#"{"kind":"poly","coef":[1]}"#).is_err());
    }
}
