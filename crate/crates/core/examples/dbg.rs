use walker_holonomy::*;
use walker_holonomy::transport::{sample_holonomy, SampleOptions};
use walker_holonomy::algebra::{flatten, orthonormal_rows};
use nalgebra::DMatrix;

fn main() {
    let spec = load_metric_spec(std::path::Path::new("specs/curved-screen-u.wm")).unwrap();
    let geom = Geometry::new(spec);
    let base = Point::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let samples = sample_holonomy(&geom, &base, 24, 7, SampleOptions::default()).unwrap();
    let elements: Vec<_> = samples.iter().map(|s| s.element.clone()).collect();
    let rows: Vec<_> = elements.iter().map(flatten).collect();
    let on = orthonormal_rows(&rows, 1e-5);

    // unflatten via the crate path: bracket of unflattened elements
    let unflat: Vec<_> = on.iter().map(|r| {
        let m = DMatrix::from_iterator(4, 4, r.iter().copied());
        let a = 0.5 * (m[(0,0)] - m[(3,3)]);
        let x = nalgebra::DVector::from_iterator(2, (0..2).map(|i| 0.5*(m[(0,1+i)] - m[(1+i,3)])));
        let mid = m.view((1,1),(2,2));
        let block = DMatrix::from_fn(2,2,|i,j| 0.5*(mid[(i,j)] - mid[(j,i)]));
        walker_holonomy::curvature::LorentzBlockElement::new(a, x, block).unwrap()
    }).collect::<Vec<_>>();

    let mut rows2: Vec<_> = on.clone();
    for i in 0..unflat.len() {
        for j in (i+1)..unflat.len() {
            let b = unflat[i].bracket(&unflat[j]);
            let f = flatten(&b);
            println!("bracket({i},{j}) norm {:.3e} coord0 {:+.3e}", f.norm(), f[0]);
            rows2.push(f);
        }
    }
    let k = rows2.len();
    let mut m = DMatrix::zeros(k, 16);
    for (i, r) in rows2.iter().enumerate() { m.row_mut(i).copy_from(&r.transpose()); }
    let svd = m.clone().svd(false, true);
    println!("sv: {:?}", svd.singular_values.as_slice().iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>());
    let vt = svd.v_t.unwrap();
    for i in 0..4.min(vt.nrows()) {
        println!("v_t[{i}] coord0 {:+.4e} coord15 {:+.4e}", vt[(i,0)], vt[(i,15)]);
    }
}
