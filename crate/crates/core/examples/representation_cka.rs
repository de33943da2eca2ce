//! Linear CKA between activation matrices, and its invariances.

use std::collections::BTreeMap;

use error_align::domain::RepresentationMatrix;
use error_align::representation::{hsic, linear_cka, linear_gram};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn to_rep(id: &str, m: &DMatrix<f64>) -> error_align::Result<RepresentationMatrix> {
    let rows: BTreeMap<String, Vec<f64>> = (0..m.nrows())
        .map(|i| (format!("img{i:03}"), m.row(i).iter().copied().collect()))
        .collect();
    RepresentationMatrix::new(id, rows)
}

fn main() -> error_align::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut gauss = |r, c| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let x = gauss(64, 16);
    // Y shares half of X's signal
    let y = &x.columns(0, 8).into_owned() + gauss(64, 8) * 0.5;
    let q = gauss(16, 16).qr().q();
    let unrelated = gauss(64, 16);

    let cka =
        |a: &DMatrix<f64>, b: &DMatrix<f64>| linear_cka(&to_rep("a", a)?, &to_rep("b", b)?).map(|r| r.value.unwrap());
    println!("CKA(X, Y)          = {:.6}", cka(&x, &y)?);
    println!("CKA(X·Q, Y)        = {:.6}  (Q orthogonal)", cka(&(&x * &q), &y)?);
    println!("CKA(3.5·X, Y)      = {:.6}", cka(&(&x * 3.5), &y)?);
    println!("CKA(X, unrelated)  = {:.6}", cka(&x, &unrelated)?);

    let k = linear_gram(&to_rep("x", &x)?);
    println!("HSIC(K, K)         = {:.4}", hsic(&k, &k)?);
    Ok(())
}
