mod common;

use common::*;
use sheetreader::bench::gen::GenSpec;

#[test]
fn smoke() {
    for spec in [GenSpec::mixed(300).blank(0.1), GenSpec::mixed(300).blank(0.5).refs(false), GenSpec::numeric(200, 3).dimension(false).refs(false)] {
        let f = fixture(&spec);
        for (mode, o) in engine_matrix() {
            let got = csv_of(&f.workbook, mode, &o);
            assert!(got == f.csv, "{mode} {o:?}: {:?}", first_difference(&got, &f.csv));
        }
    }
}
