use dipsq::snapshot::{emit, parse, Cell, Snapshot};
use proptest::prelude::*;

fn cell() -> impl Strategy<Value = Cell> {
    prop_oneof![Just(Cell::Empty), Just(Cell::Atom), Just(Cell::Up), Just(Cell::Down)]
}

fn snapshot() -> impl Strategy<Value = Snapshot> {
    (1usize..12, 1usize..9, "[a-z0-9_]{1,8}", 1.0f64..1000.0, proptest::collection::vec(("[a-z_]{1,6}", "[a-z0-9.]{1,6}"), 0..3))
        .prop_flat_map(|(nx, ny, id, spacing, extras)| {
            proptest::collection::vec(cell(), nx * ny).prop_map(move |cells| Snapshot {
                id: id.clone(),
                spacing_nm: spacing,
                extras: extras.clone(),
                nx,
                ny,
                cells,
            })
        })
}

proptest! {
    #[test]
    fn emit_then_parse_is_identity(snaps in proptest::collection::vec(snapshot(), 1..4)) {
        let text = emit(&snaps);
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &snaps);
        prop_assert_eq!(emit(&back), text);
    }

    #[test]
    fn parse_then_emit_is_canonical(snaps in proptest::collection::vec(snapshot(), 1..4), pad in 1usize..3) {
        // extra blank lines between blocks are not significant
        let loose = emit(&snaps).replace("\n#", &format!("{}#", "\n".repeat(pad)));
        let canonical = emit(&parse(&loose).unwrap());
        prop_assert_eq!(canonical, emit(&snaps));
    }
}
