//! Small built-in databases used by documentation, tests and benchmarks.

use crate::data::Database;
use crate::tuple;

/// Academic bibliography: five authors (endogenous), institutions,
/// publications and citation counts (exogenous).
pub fn bibliography() -> Database {
    bibliography_with(false)
}

/// Same data, but publications are endogenous too (11 players).
pub fn bibliography_pub_endo() -> Database {
    bibliography_with(true)
}

fn bibliography_with(pub_endo: bool) -> Database {
    let mut b = Database::builder()
        .relation("Author", 2)
        .relation("Inst", 2)
        .relation("Pub", 2)
        .relation("Citations", 2)
        .endo("Author", tuple!["Alice", "UCLA"])
        .endo("Author", tuple!["Bob", "NYU"])
        .endo("Author", tuple!["Cathy", "UCSD"])
        .endo("Author", tuple!["David", "MIT"])
        .endo("Author", tuple!["Ellen", "UCSD"])
        .exo("Inst", tuple!["UCLA", "CA"])
        .exo("Inst", tuple!["UCSD", "CA"])
        .exo("Inst", tuple!["NYU", "NY"])
        .exo("Inst", tuple!["MIT", "MA"]);
    let pubs = [
        ("Alice", "A"),
        ("Alice", "B"),
        ("Bob", "C"),
        ("Cathy", "C"),
        ("Cathy", "D"),
        ("David", "C"),
    ];
    for (author, paper) in pubs {
        b = if pub_endo {
            b.endo("Pub", tuple![author, paper])
        } else {
            b.exo("Pub", tuple![author, paper])
        };
    }
    b.exo("Citations", tuple!["A", 18])
        .exo("Citations", tuple!["B", 2])
        .exo("Citations", tuple!["C", 8])
        .exo("Citations", tuple!["D", 12])
        .build()
}

/// Six endogenous directed edges with three a→b routes: the direct edge e1,
/// the two-hop route e2·e3 and the three-hop route e4·e5·e6.
pub fn six_edge_graph() -> Database {
    Database::builder()
        .relation("Edge", 2)
        .endo("Edge", tuple!["a", "b"]) // e1
        .endo("Edge", tuple!["a", "c"]) // e2
        .endo("Edge", tuple!["c", "b"]) // e3
        .endo("Edge", tuple!["a", "d"]) // e4
        .endo("Edge", tuple!["d", "e"]) // e5
        .endo("Edge", tuple!["e", "b"]) // e6
        .build()
}

/// Two binary relations R and S, eight endogenous facts. The worked example
/// for the subset-counting dynamic program.
pub fn rs_pairs() -> Database {
    Database::builder()
        .relation("R", 2)
        .relation("S", 2)
        .endo("R", tuple![1, 2])
        .endo("R", tuple![1, 3])
        .endo("R", tuple![2, 1])
        .endo("R", tuple![3, 1])
        .endo("S", tuple![1, 1])
        .endo("S", tuple![1, 5])
        .endo("S", tuple![2, 3])
        .endo("S", tuple![2, 4])
        .build()
}

/// The full four-relation variant of [`rs_pairs`], adding T and U.
pub fn rstu() -> Database {
    Database::builder()
        .relation("R", 2)
        .relation("S", 2)
        .relation("T", 2)
        .relation("U", 1)
        .endo("R", tuple![1, 2])
        .endo("R", tuple![1, 3])
        .endo("R", tuple![2, 1])
        .endo("R", tuple![3, 1])
        .endo("S", tuple![1, 1])
        .endo("S", tuple![1, 5])
        .endo("S", tuple![2, 3])
        .endo("S", tuple![2, 4])
        .endo("T", tuple![1, 1])
        .endo("T", tuple![2, 2])
        .endo("T", tuple![3, 3])
        .endo("T", tuple![5, 6])
        .endo("U", tuple![1])
        .endo("U", tuple![2])
        .endo("U", tuple![3])
        .endo("U", tuple![4])
        .build()
}

/// Citation counts as the endogenous relation, used by the single-atom
/// max/min engine tests.
pub fn citations_endo() -> Database {
    Database::builder()
        .relation("Citations", 2)
        .endo("Citations", tuple!["A", 18])
        .endo("Citations", tuple!["B", 2])
        .endo("Citations", tuple!["C", 8])
        .endo("Citations", tuple!["D", 12])
        .build()
}
