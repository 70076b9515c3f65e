//! Synthesizes class embeddings from primitive mixtures and shows that
//! embedding similarity tracks mixture similarity.
//!
//! `cargo run --release --example embeddings -- [noise_sigma]`

use primseg::scenegen::{default_taxonomy, mixture_overlap};
use primseg::semantics::synthesize_embeddings;

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn main() -> primseg::Result<()> {
    let noise: f64 = std::env::args().nth(1).map(|s| s.parse().expect("noise")).unwrap_or(0.05);
    let d = default_taxonomy();
    let names = d.taxonomy.names();
    let table = synthesize_embeddings(d.taxonomy.mixture_matrix().view(), &names, 600, noise, 0)?;
    let cos = table.cosine_matrix();

    let (mut overlaps, mut cosines) = (Vec::new(), Vec::new());
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let (a, b) = (d.taxonomy.categories[i].mixture(), d.taxonomy.categories[j].mixture());
            overlaps.push(mixture_overlap(&a, &b));
            cosines.push(cos[[i, j]]);
        }
    }
    println!("nearest class by embedding cosine:");
    for (i, name) in names.iter().enumerate() {
        let (j, c) = (0..names.len())
            .filter(|&j| j != i)
            .map(|j| (j, cos[[i, j]]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        println!("  {name:<8} -> {:<8} cos {c:.3}", names[j]);
    }
    println!(
        "Spearman(mixture overlap, embedding cosine) over {} pairs = {:.3}",
        overlaps.len(),
        pearson(&ranks(&overlaps), &ranks(&cosines))
    );
    Ok(())
}
