//! Shuffled presentation order is a function of the protocol seed; the
//! controller walks it and reports scene events.

use visionsim::experiment::{resolve_order, Command, Controller, OrderMode, Protocol, SceneEntry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut protocol = Protocol {
        name: "order_demo".into(),
        order_mode: OrderMode::Shuffled,
        seed: 42,
        scenes: [
            "baseline",
            "matching_task",
            "matching_task",
            "questionnaire",
            "main_menu",
        ]
        .iter()
        .map(|id| SceneEntry::new(*id, ""))
        .collect(),
    };
    for seed in [42, 42, 7] {
        protocol.seed = seed;
        println!("seed {seed:>2}: {:?}", resolve_order(&protocol));
    }

    let mut controller = Controller::new(protocol.clone())?;
    let mut events = controller.step(Command::Start)?;
    while controller.current().is_some() {
        events.extend(controller.step(Command::Next)?);
    }
    for e in events {
        let name = protocol.scene_name(e.scene_index);
        println!("{:>20?} position {} {}", e.kind, e.position, name);
    }
    Ok(())
}
