//! Product manifolds: ordered lists of isometry points and tangents, with
//! all geometric operations applied factor-wise and the metric summed.

use super::{
    metric, precondition, project, retract, transport, IsometryPoint, Result, Tangent, Transporter,
};
use crate::linalg::CMatrix;

/// Ordered product of isometry points — the state of a whole network.
#[derive(Debug, Clone)]
pub struct ProductPoint(pub Vec<IsometryPoint>);

/// Tangent of a [`ProductPoint`]: factor `i` is based at point `i`.
#[derive(Debug, Clone)]
pub struct ProductTangent(pub Vec<Tangent>);

/// Factor-wise transporter returned by [`product_retract`].
pub struct ProductTransporter(pub Vec<Transporter>);

impl ProductPoint {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn zero_tangent(&self) -> ProductTangent {
        ProductTangent(self.0.iter().map(|p| p.zero_tangent()).collect())
    }
}

impl ProductTangent {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scale(&self, s: f64) -> ProductTangent {
        ProductTangent(self.0.iter().map(|t| t.scale(s)).collect())
    }

    pub fn axpy(&mut self, s: f64, other: &ProductTangent) {
        assert_eq!(self.0.len(), other.0.len());
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            a.axpy(s, b);
        }
    }

    pub fn norm(&self) -> f64 {
        product_metric(self, self).sqrt()
    }
}

impl ProductTransporter {
    pub fn apply(&self, y: &ProductTangent) -> ProductTangent {
        assert_eq!(self.0.len(), y.0.len());
        ProductTangent(
            self.0
                .iter()
                .zip(y.0.iter())
                .map(|(t, yi)| t.apply(yi))
                .collect(),
        )
    }
}

/// Factor-wise projection of a list of embedding-space matrices.
pub fn product_project(x: &ProductPoint, mats: &[CMatrix]) -> Result<ProductTangent> {
    assert_eq!(x.len(), mats.len());
    let mut out = Vec::with_capacity(x.len());
    for (w, d) in x.0.iter().zip(mats.iter()) {
        out.push(project(w, d)?);
    }
    Ok(ProductTangent(out))
}

/// Sum of the per-factor metrics, accumulated in a fixed order.
pub fn product_metric(x: &ProductTangent, y: &ProductTangent) -> f64 {
    assert_eq!(x.0.len(), y.0.len());
    x.0.iter().zip(y.0.iter()).map(|(a, b)| metric(a, b)).sum()
}

/// Factor-wise retraction; returns the end point, the transported
/// direction, and a transporter for further tangents.
pub fn product_retract(
    x: &ProductPoint,
    dir: &ProductTangent,
    alpha: f64,
) -> Result<(ProductPoint, ProductTangent, ProductTransporter)> {
    assert_eq!(x.len(), dir.0.len());
    let mut points = Vec::with_capacity(x.len());
    let mut tangents = Vec::with_capacity(x.len());
    let mut transporters = Vec::with_capacity(x.len());
    for (w, d) in x.0.iter().zip(dir.0.iter()) {
        let r = retract(w, d, alpha)?;
        points.push(r.point);
        tangents.push(r.tangent);
        transporters.push(r.transporter);
    }
    Ok((
        ProductPoint(points),
        ProductTangent(tangents),
        ProductTransporter(transporters),
    ))
}

/// Factor-wise transport of `y` along the flow of `dir`.
pub fn product_transport(
    y: &ProductTangent,
    x: &ProductPoint,
    dir: &ProductTangent,
    alpha: f64,
) -> Result<ProductTangent> {
    assert_eq!(x.len(), y.0.len());
    assert_eq!(x.len(), dir.0.len());
    let mut out = Vec::with_capacity(x.len());
    for ((w, yi), di) in x.0.iter().zip(y.0.iter()).zip(dir.0.iter()) {
        out.push(transport(yi, w, di, alpha)?);
    }
    Ok(ProductTangent(out))
}

/// Factor-wise preconditioning with per-factor density matrices and
/// regularization strengths.
pub fn product_precondition(
    x: &ProductTangent,
    rhos: &[CMatrix],
    deltas: &[f64],
) -> Result<ProductTangent> {
    assert_eq!(x.0.len(), rhos.len());
    assert_eq!(x.0.len(), deltas.len());
    let mut out = Vec::with_capacity(x.0.len());
    for ((t, rho), &delta) in x.0.iter().zip(rhos.iter()).zip(deltas.iter()) {
        out.push(precondition(t, rho, delta)?);
    }
    Ok(ProductTangent(out))
}
