//! Problem fixtures shared by the benchmarks.

use rhm_core::problems::{
    fragmented_hypercube, random_spd_dataset, QuadBilinear, QuadBilinearParams, Rgpca, RgpcaData, Srwd, TraceLog,
};
use rhm_core::MinMaxProblem;

/// One instance per problem family, named for benchmark ids.
pub fn problems() -> Vec<(&'static str, Box<dyn MinMaxProblem>)> {
    vec![
        ("quad_bilinear_d30", Box::new(QuadBilinear::new(QuadBilinearParams::new(30, 1.0, 1.0).unwrap()))),
        ("tracelog_d10", Box::new(TraceLog::random(10, 0.5, 2.0, 0).unwrap())),
        (
            "rgpca_d10_n8",
            Box::new(Rgpca::new(RgpcaData::new(random_spd_dataset(8, 10, 0.2, 4.5, 0).unwrap(), 0.1).unwrap())),
        ),
        (
            "srwd_n40_d10",
            Box::new(Srwd::new(fragmented_hypercube(40, 10, 2, 0).unwrap().with_subspace(3, 0.2).unwrap())),
        ),
    ]
}
