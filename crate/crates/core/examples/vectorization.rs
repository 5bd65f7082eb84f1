//! Half-vectorization of symmetric matrices and PSD factors.

use covtest::linalg::{psd_factor, unvech, vech, vech_index, vech_strict, SymMatrix};

fn main() -> covtest::Result<()> {
    let v = SymMatrix::from_row_slice(3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0])?;

    let full = vech(&v);
    println!("vech(V)   = {:?}", full.as_slice());
    println!("V[1,2] sits at position {}", vech_index(3, 1, 2));
    assert_eq!(unvech(&full), v);

    let r = SymMatrix::from_row_slice(3, &[1.0, 0.3, -0.2, 0.3, 1.0, 0.6, -0.2, 0.6, 1.0])?;
    let strict = vech_strict(&r)?;
    println!("vech⁻(R)  = {:?}", strict.as_slice());
    println!("R back    = {}", unvech(&strict).as_matrix());

    // rank-deficient covariance: the factor has fewer columns than rows
    let singular = SymMatrix::from_row_slice(2, &[1.0, 1.0, 1.0, 1.0])?;
    let l = psd_factor(&singular, 1e-10)?;
    println!("factor of a rank-1 matrix is {}×{}", l.nrows(), l.ncols());
    Ok(())
}
