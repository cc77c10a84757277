//! Road-update heuristic: after edge insertions or weight reductions, a
//! trained model can still answer queries by also considering detours
//! through each modified edge.

use super::model::{DistanceModel, QueryScratch};
use crate::error::Result;
use crate::graph::NodeId;

/// `min(d̂(u,v), min over (s,t,w) of d̂(u,s) + w + d̂(t,v), d̂(u,t) + w + d̂(s,v))`.
pub fn update_heuristic_predict(
    model: &DistanceModel,
    u: NodeId,
    v: NodeId,
    modified_edges: &[(NodeId, NodeId, f64)],
) -> Result<f64> {
    model.check_query(u, v)?;
    for &(s, t, _) in modified_edges {
        model.check_query(s, t)?;
    }
    let mut q = QueryScratch::default();
    let mut best = model.predict_with(u, v, &mut q);
    for &(s, t, w) in modified_edges {
        let a = model.predict_with(u, s, &mut q) + w + model.predict_with(t, v, &mut q);
        let b = model.predict_with(u, t, &mut q) + w + model.predict_with(s, v, &mut q);
        best = best.min(a).min(b);
    }
    Ok(best)
}
