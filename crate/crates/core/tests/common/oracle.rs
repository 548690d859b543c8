//! Naive reference implementation of the per-target scores.
//!
//! Written as plain index loops over raw `f64` slices. It shares nothing with
//! the library's scoring path beyond reading vectors out of the store.

use mcas_core::embedding::text_content_id;
use mcas_core::synthetic::SyntheticDataset;

pub fn cos(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len());
    let mut dot = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    dot / (uu.sqrt() * vv.sqrt())
}

pub fn s(w: &[f64], a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut sa = 0.0;
    for x in a {
        sa += cos(w, x);
    }
    let mut sb = 0.0;
    for x in b {
        sb += cos(w, x);
    }
    sa / a.len() as f64 - sb / b.len() as f64
}

pub fn set_s(ws: &[Vec<f64>], a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for w in ws {
        total += s(w, a, b);
    }
    total / ws.len() as f64
}

/// `[II, ITP, ITA, TT, MCAS]` per target, in manifest order.
pub fn target_scores(d: &SyntheticDataset) -> Vec<[f64; 5]> {
    let vec_of = |id: &str| d.store.get(id, &d.model_id).expect("stored").vector.clone();
    let text = |t: &str| vec_of(&text_content_id(t).unwrap());
    let image = |owner: &str, i: u32| vec_of(d.index.image(owner, i).expect("indexed"));
    let m = &d.manifest;

    let ta: Vec<Vec<f64>> = m.attributes.text_a.iter().map(|w| text(w)).collect();
    let tb: Vec<Vec<f64>> = m.attributes.text_b.iter().map(|w| text(w)).collect();
    let mut ia = Vec::new();
    for p in &m.attributes.image_prompts_a {
        for i in 0..p.image_count {
            ia.push(image(&p.prompt, i));
        }
    }
    let mut ib = Vec::new();
    for p in &m.attributes.image_prompts_b {
        for i in 0..p.image_count {
            ib.push(image(&p.prompt, i));
        }
    }

    let mut out = Vec::new();
    for t in &m.targets {
        let prompt = vec![text(&t.prompt)];
        let imgs: Vec<Vec<f64>> = (0..t.image_count).map(|i| image(&t.id, i)).collect();
        let ii = set_s(&imgs, &ia, &ib);
        let itp = set_s(&prompt, &ia, &ib);
        let ita = set_s(&imgs, &ta, &tb);
        let tt = set_s(&prompt, &ta, &tb);
        out.push([ii, itp, ita, tt, ii + itp + ita + tt]);
    }
    out
}
