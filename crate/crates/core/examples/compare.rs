//! Side-by-side view of the boundary studies and the FC-OPF, with the bounding check.

use fcopf::compare::compare_results;
use fcopf::netmodel::build_cigre_lv_fixture;
use fcopf::study::{run_study, StudyKind, StudyOptions};

fn main() -> fcopf::Result<()> {
    let net = build_cigre_lv_fixture();
    let no_dg = StudyOptions {
        no_dg: true,
        ..Default::default()
    };
    let results = vec![
        run_study(StudyKind::ShortCircuit, &net, &no_dg)?,
        run_study(StudyKind::ShortCircuit, &net, &StudyOptions::default())?,
        run_study(StudyKind::Fcopf, &net, &StudyOptions::default())?,
    ];
    let labels = ["no DG", "max DG", "FC-OPF"].map(String::from).to_vec();
    let cmp = compare_results(labels, &results)?;
    print!("{}", cmp.render());
    Ok(())
}
