//! Sample one task per template and show its subgoal plan.

use diffscene::bench::sample_task;
use diffscene::planner::{plan_from_task, TaskType};
use diffscene::world::Catalog;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> diffscene::Result<()> {
    let catalog = Catalog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in TaskType::ALL {
        let task = sample_task(t, &catalog, 0.3, &mut rng)?;
        let plan = plan_from_task(&task)?;
        println!("{:<20} {task}", t.name());
        for (i, sg) in plan.iter().enumerate() {
            println!("    {i}: {sg}");
        }
    }
    Ok(())
}
