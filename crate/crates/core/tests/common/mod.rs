//! Shared fixtures for the integration suites.

#![allow(dead_code)]

pub use maxconf_core::testgen::*;

use maxconf_core::extract::{build_pcmap, scan_str, PcMap};
use maxconf_core::formula::{PropFormula, VarTable};

pub const NESTED_BRANCHES: &str = "\
#if C1
   free(p1);
#endif

#if C2
  #if C1
    free(p2);
    x++;
    printf(\"x\");
  #else
    free(p3);
  #endif
#endif
";

pub const REPEATED_CONDITION: &str = "\
#if C4 || C5
   free(p1);
#endif

#if C5
   printf(\"a\");
#endif

#if !C5 && C6
   free(p2);
#endif

#if C5
   printf(\"b\");
   p = malloc(4);
#endif
";

pub fn sample_map() -> PcMap {
    let mut vars = VarTable::new();
    let instances = scan_str(REPEATED_CONDITION, "b.c", &mut vars).unwrap();
    build_pcmap(instances, PropFormula::True, vars)
}

