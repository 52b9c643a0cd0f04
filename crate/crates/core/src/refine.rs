//! Newest-vertex bisection with conforming closure.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::mesh::BackgroundMesh;

/// A refined mesh together with the parent (input) triangle of every child.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: BackgroundMesh,
    pub parent: Vec<usize>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Bisects every marked triangle across its refinement edge, plus whatever
/// closure is needed to keep the mesh free of hanging nodes.
///
/// Existing vertices keep their indices and coordinates; new midpoints are
/// appended. Children appear in the order of their parents.
pub fn refine(mesh: &BackgroundMesh, marked: &[usize]) -> Result<Refinement> {
    if let Some(&bad) = marked.iter().find(|&&k| k >= mesh.num_triangles()) {
        return Err(Error::InvalidArgument(format!("marked triangle {bad} does not exist")));
    }
    if marked.is_empty() {
        return Ok(Refinement { mesh: mesh.clone(), parent: (0..mesh.num_triangles()).collect() });
    }

    let triangles = mesh.triangles();
    let mut marked_edges: HashSet<(usize, usize)> = HashSet::new();
    for &k in marked {
        let t = triangles[k];
        marked_edges.insert(edge_key(t[1], t[2]));
    }
    loop {
        let mut changed = false;
        for t in triangles {
            let refinement_edge = edge_key(t[1], t[2]);
            if marked_edges.contains(&refinement_edge) {
                continue;
            }
            if marked_edges.contains(&edge_key(t[0], t[1])) || marked_edges.contains(&edge_key(t[2], t[0])) {
                marked_edges.insert(refinement_edge);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut children = Vec::with_capacity(triangles.len() + 2 * marked_edges.len());
    let mut parent = Vec::with_capacity(children.capacity());
    for (k, &t) in triangles.iter().enumerate() {
        let mut stack = vec![t];
        let mut out = Vec::new();
        while let Some(t) = stack.pop() {
            let key = edge_key(t[1], t[2]);
            if marked_edges.contains(&key) {
                let m = *midpoints.entry(key).or_insert_with(|| {
                    vertices.push((vertices[t[1]] + vertices[t[2]]) / 2.0);
                    vertices.len() - 1
                });
                // pushed in reverse so that the first child is processed first
                stack.push([m, t[2], t[0]]);
                stack.push([m, t[0], t[1]]);
            } else {
                out.push(t);
            }
        }
        parent.extend(std::iter::repeat_n(k, out.len()));
        children.extend(out);
    }
    let refined = BackgroundMesh::from_triangles(vertices, children)?;
    Ok(Refinement { mesh: refined, parent })
}

/// Refines every triangle `levels` times by two rounds of bisection each, which
/// halves the mesh size per level.
pub fn uniform_refine(mesh: &BackgroundMesh, levels: usize) -> Result<BackgroundMesh> {
    let mut m = mesh.clone();
    for _ in 0..2 * levels {
        let all: Vec<usize> = (0..m.num_triangles()).collect();
        m = refine(&m, &all)?.mesh;
    }
    Ok(m)
}
