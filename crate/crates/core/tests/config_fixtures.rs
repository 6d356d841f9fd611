use eqsim_core::compound::*;
use proptest::prelude::*;

const FIXTURES: &[(&str, &str)] = &[
    ("time_multiplex", include_str!("../../../fixtures/time_multiplex.eqc")),
    ("tiles", include_str!("../../../fixtures/tiles.eqc")),
    ("pixel", include_str!("../../../fixtures/pixel.eqc")),
    ("subpixel", include_str!("../../../fixtures/subpixel.eqc")),
    ("display_wall", include_str!("../../../fixtures/display_wall.eqc")),
    ("load_balanced_2d", include_str!("../../../fixtures/load_balanced_2d.eqc")),
    ("database", include_str!("../../../fixtures/database.eqc")),
];

fn fixture(name: &str) -> Parsed {
    let (_, text) = FIXTURES.iter().find(|(n, _)| *n == name).unwrap();
    parse_config(text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn all_fixtures_reach_print_parse_fixpoint() {
    for (name, text) in FIXTURES {
        let first = parse_config(text).unwrap_or_else(|e| panic!("{name}: {e}")).config;
        let printed = print_config(&first);
        let second = parse_config(&printed).unwrap_or_else(|e| panic!("{name} reprint: {e}\n{printed}")).config;
        assert_eq!(first, second, "{name}");
        assert_eq!(print_config(&second), printed, "{name}");
    }
}

#[test]
fn time_multiplex_listing() {
    let cfg = fixture("time_multiplex").config;
    let root = &cfg.compounds[0];
    assert_eq!(root.channel.as_deref(), Some("destination"));
    assert_eq!(root.equalizers, vec![EqualizerSpec::Framerate]);
    let phases: Vec<_> = root.children.iter().map(|c| (c.phase.phase, c.phase.period)).collect();
    assert_eq!(phases, vec![(0, 3), (1, 3), (2, 3)]);
    assert_eq!(cfg.effective_latency(), 3);
}

#[test]
fn tiles_listing() {
    let root = &fixture("tiles").config.compounds[0];
    let q = root.output_tiles.as_ref().unwrap();
    assert_eq!((q.name.as_str(), q.size), ("queue", (64, 64)));
    assert_eq!(root.children.len(), 4);
    assert!(root.children.iter().all(|c| c.input_tiles.as_deref() == Some("queue")));
    let plan = plan_frame(root, &TaskContext::new(0, (256, 128), &Splits::new())).unwrap();
    assert!(plan.tasks.is_empty());
    assert_eq!(plan.queues[0].tiles.len(), 8);
    assert_eq!(plan.queues[0].consumers.len(), 4);
}

#[test]
fn pixel_listing() {
    let p = fixture("pixel");
    assert!(p.warnings.is_empty(), "{:?}", p.warnings);
    let root = &p.config.compounds[0];
    let params: Vec<_> = root.children.iter().map(|c| c.pixel).collect();
    assert_eq!(params[1], PixelParam::new(1, 0, 3, 1).unwrap());
    assert!(root.children[0].output_frames[0].texture);
    let tasks = generate_tasks(root, &TaskContext::new(0, (9, 2), &Splits::new())).unwrap();
    assert_eq!(tasks.len(), 3);
}

#[test]
fn subpixel_listing_keeps_duplicate_index_and_warns() {
    let p = fixture("subpixel");
    let root = &p.config.compounds[0];
    let idx: Vec<_> = root.children.iter().map(|c| (c.subpixel.index, c.subpixel.size)).collect();
    assert_eq!(idx, vec![(0, 3), (1, 3), (1, 3)]);
    assert_eq!(p.warnings.len(), 1);
    assert!(p.warnings[0].message.contains("subpixel"));
}

#[test]
fn display_wall_derives_seven_channels() {
    let cfg = fixture("display_wall").config;
    let canvas = cfg.canvas("wall").unwrap();
    let layout = cfg.layout(canvas.layout.as_deref().unwrap()).unwrap();
    let channels = derive_channels(canvas, layout);
    assert_eq!(channels.len(), 7);
    let control = cfg.canvas("control").unwrap();
    assert_eq!(derive_channels(control, cfg.layout("single").unwrap()).len(), 1);
}

fn arb_viewport() -> impl Strategy<Value = Viewport> {
    (0u32..8, 0u32..8, 1u32..8, 1u32..8).prop_map(|(x, y, w, h)| {
        let (x, y) = (x as f64 / 16.0, y as f64 / 16.0);
        Viewport::new(x, y, w as f64 / 16.0, h as f64 / 16.0).unwrap()
    })
}

fn arb_leaf() -> impl Strategy<Value = Compound> {
    (
        "[a-z]{1,6}",
        prop::option::of(arb_viewport()),
        prop::option::of((0u32..4, 1u32..5)),
        prop::option::of((1u32..9, 1u32..9)),
        any::<bool>(),
        prop::option::of(0.1f64..4.0),
    )
        .prop_map(|(ch, vp, pix, range, texture, usage)| {
            let mut c = Compound::leaf(&ch);
            if let Some(vp) = vp {
                c.viewport = vp;
            }
            if let Some((o, n)) = pix {
                c.pixel = PixelParam::new(o % n, 0, n, 1).unwrap();
            }
            if let Some((a, b)) = range {
                let (lo, hi) = (a.min(b) as f64 / 10.0, (a.max(b) + 1) as f64 / 10.0);
                c.range = Range::new(lo, hi.min(1.0)).unwrap();
            }
            if let Some(u) = usage {
                c.usage = u;
            }
            c.output_frames.push(FrameSpec { name: None, texture });
            c
        })
}

fn arb_config() -> impl Strategy<Value = Config> {
    (
        prop::collection::vec(arb_leaf(), 1..5),
        prop::option::of((0.0f64..1.0, 0.0f64..16.0, 1u32..16)),
        prop::option::of(1u32..5),
    )
        .prop_map(|(kids, eq, latency)| {
            let mut root = Compound::leaf("root dest");
            for (i, mut k) in kids.into_iter().enumerate() {
                k.channel = Some(format!("{}{i}", k.channel.unwrap()));
                root.input_frames.push(FrameSpec {
                    name: Some(format!("frame.{}", k.channel.as_deref().unwrap())),
                    texture: false,
                });
                root.children.push(k);
            }
            if let Some((damping, resistance, b)) = eq {
                root.equalizers.push(EqualizerSpec::Load(SplitParams {
                    mode: SplitMode::Vertical,
                    damping,
                    resistance,
                    boundary: (b, 1),
                }));
                root.equalizers.push(EqualizerSpec::Dfr { framerate: 30.0 });
            }
            Config {
                latency,
                compounds: vec![root],
                ..Config::default()
            }
        })
}

proptest! {
    #[test]
    fn printed_configs_parse_back(cfg in arb_config()) {
        let text = print_config(&cfg);
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back.config, cfg);
    }
}
