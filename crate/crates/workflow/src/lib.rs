//! Workflow engine: turn a prompt into an abstract plan, bind each task to a
//! feasible (site, capability, server) tuple, then authorize and invoke the
//! bindings in order.
//!
//! ```text
//! run_workflow(p) = execute(resolve(plan(p, planner), servers, sites), credential)
//! ```

pub mod error;
pub mod execute;
pub mod plan;
pub mod resolve;
pub mod scenario;
pub mod template;
pub mod trace;

pub use error::WorkflowError;
pub use execute::{execute, Environment, RetryPolicy, UserCredential};
pub use plan::{plan, AbstractPlan, AbstractTask, DeterministicPlanner, Planner, UserPromptSpec};
pub use resolve::{is_feasible, resolve, Binding, ConcretePlan, DiscoveryLink, UnresolvedTask};
pub use scenario::{Scenario, ScenarioError, ScenarioRun};
pub use trace::{ExecutionOutput, FinalStatus, TaskOutcome, TraceEvent, TraceKind};

/// All three stages. Plan and resolve errors are returned as-is and nothing
/// after the failing stage runs; execute failures live in the output.
pub fn run_workflow(
    prompt: &UserPromptSpec,
    planner: &dyn Planner,
    env: &Environment,
    credential: &UserCredential,
    policy: &RetryPolicy,
) -> Result<ExecutionOutput, WorkflowError> {
    let abstract_plan = plan(prompt, planner)?;
    let concrete = resolve(&abstract_plan, &env.servers, &env.sites, env.discovery.as_ref())?;
    Ok(execute(&concrete, env, credential, policy))
}
