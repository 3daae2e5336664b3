//! Project two embeddings onto their top principal components, before and
//! after mapping, for plotting.
//!
//! `cargo run --release --example pca_projection -- [out_dir]`

use ndarray::concatenate;
use ndarray::Axis;
use netalign::embedding::EmbeddingMatrix;
use netalign::eval::pca_project;
use netalign::synthetic::rotation_fixture;

fn main() -> anyhow::Result<()> {
    let (x1, x2, _) = rotation_fixture(200, 8, 5);
    let joint = concatenate(Axis(0), &[x1.vectors().view(), x2.vectors().view()])?;
    let labels: Vec<String> = (0..200).map(|i| format!("g1:{i}")).chain((0..200).map(|i| format!("g2:{i}"))).collect();
    let both = EmbeddingMatrix::new(joint, labels.clone())?;

    let pca = pca_project(&both, 2)?;
    let total: f64 = both.vectors().var_axis(Axis(0), 1.0).sum();
    println!(
        "top two components explain {:.3} and {:.3} of a total variance {:.3}",
        pca.explained_variance[0], pca.explained_variance[1], total
    );
    let tsv = pca.to_tsv(&labels);
    match std::env::args().nth(1) {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            let path = std::path::Path::new(&dir).join("pca.tsv");
            std::fs::write(&path, tsv)?;
            println!("wrote {}", path.display());
        }
        None => tsv.lines().take(6).for_each(|l| println!("{l}")),
    }
    Ok(())
}
