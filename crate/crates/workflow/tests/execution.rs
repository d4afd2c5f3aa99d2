//! Authorization, retry and stage-isolation behaviour against the shipped
//! fixture.

use scimcp_services::{Deployment, Fixture};
use scimcp_workflow::trace::{check_authorize_before_invoke, summarize, TraceKind};
use scimcp_workflow::{
    execute, plan, resolve, run_workflow, AbstractTask, DeterministicPlanner, Environment, FinalStatus, RetryPolicy,
    UserCredential, UserPromptSpec, WorkflowError,
};
use serde_json::json;
use std::path::PathBuf;

fn fixture() -> Fixture {
    Fixture::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/fixture.json")).unwrap()
}

fn env_with(f: Fixture) -> Environment {
    Environment::from_deployment(&Deployment::from_fixture(f).unwrap())
}

fn stage_task() -> AbstractTask {
    AbstractTask::new(
        "stage",
        "submit_transfer",
        json!({
            "src_collection": "ncbi",
            "src_path": "/genomes/rnaseq/reads.fastq",
            "dst_collection": "polaris-eagle",
            "dst_path": "/projects/rnaseq/reads.fastq"
        }),
    )
}

fn health_task(id: &str) -> AbstractTask {
    AbstractTask::new(id, "get_system_health", json!({"system": "polaris"}))
}

fn alice() -> UserCredential {
    UserCredential::new("alice", "alice-secret")
}

#[test]
fn unentitled_user_is_denied_before_any_invoke() {
    let env = env_with(fixture());
    let prompt = UserPromptSpec::new("stage", vec![stage_task()]);
    let out = run_workflow(
        &prompt,
        &DeterministicPlanner,
        &env,
        &UserCredential::new("bob", "bob-secret"),
        &RetryPolicy::default(),
    )
    .unwrap();
    assert_eq!(out.status, FinalStatus::Failed);
    assert_eq!(out.attempts("stage"), 0);
    assert!(matches!(out.error, Some(WorkflowError::AuthDenied { ref binding, .. }) if binding == "stage"));
    assert_eq!(out.trace.len(), 1);
    assert_eq!(out.trace[0].kind, TraceKind::Authorize);
    assert_eq!(out.trace[0].outcome, "denied");
}

#[test]
fn disabled_escalation_denies_a_wider_scope() {
    let env = env_with(fixture());
    let mut cred = alice();
    cred.initial_scopes = vec!["status:read".into()];
    cred.allow_escalation = false;
    let prompt = UserPromptSpec::new("x", vec![health_task("health"), stage_task()]);
    let out = run_workflow(&prompt, &DeterministicPlanner, &env, &cred, &RetryPolicy::default()).unwrap();
    assert_eq!(out.task("health").unwrap().status, FinalStatus::Succeeded);
    assert_eq!(out.attempts("stage"), 0);
    assert_eq!(out.error.as_ref().map(WorkflowError::class), Some("AUTH_DENIED"));

    cred.allow_escalation = true;
    let env = env_with(fixture());
    let out = run_workflow(&prompt, &DeterministicPlanner, &env, &cred, &RetryPolicy::default()).unwrap();
    assert!(out.succeeded(), "{:?}", out.error);
    let auth: Vec<&str> = out
        .trace
        .iter()
        .filter(|e| e.kind == TraceKind::Authorize)
        .map(|e| e.outcome.as_str())
        .collect();
    assert_eq!(auth, ["acquired", "escalated"]);
}

#[test]
fn held_grant_is_reused_and_expired_grant_reacquired() {
    let prompt = UserPromptSpec::new("x", vec![health_task("a"), health_task("b")]);
    let env = env_with(fixture());
    let out = run_workflow(&prompt, &DeterministicPlanner, &env, &alice(), &RetryPolicy::default()).unwrap();
    let auth: Vec<&str> = out
        .trace
        .iter()
        .filter(|e| e.kind == TraceKind::Authorize)
        .map(|e| e.outcome.as_str())
        .collect();
    assert_eq!(auth, ["acquired", "held"]);
    assert_eq!(env.auth.issued_count(), 1);

    // A one-tick lifetime expires across the stage transfer's polling.
    let mut f = fixture();
    f.auth.ttl_ticks = 1;
    let env = env_with(f);
    let prompt = UserPromptSpec::new("x", vec![stage_task(), health_task("b")]);
    let out = run_workflow(&prompt, &DeterministicPlanner, &env, &alice(), &RetryPolicy::default()).unwrap();
    assert!(out.succeeded(), "{:?}", out.error);
    assert!(out
        .trace
        .iter()
        .any(|e| e.kind == TraceKind::Authorize && e.outcome == "reacquired"));
    assert!(env.auth.issued_count() > 2);
}

#[test]
fn missing_software_is_unresolved_and_nothing_is_authorized() {
    // No fixture site has gromacs.
    let mut f = fixture();
    for t in &mut f.compute.tools {
        if t.name == "build_tree" {
            t.requirements.software = ["gromacs".to_string()].into();
        }
    }
    let env = env_with(f);
    let prompt = UserPromptSpec::new(
        "tree",
        vec![AbstractTask::new("tree", "build_tree", json!({"inputs": ["a"]}))],
    );
    let r = run_workflow(&prompt, &DeterministicPlanner, &env, &alice(), &RetryPolicy::default());
    let Err(WorkflowError::UnresolvedTask(u)) = r else {
        panic!("expected unresolved, got {r:?}")
    };
    assert_eq!(u.task_id, "tree");
    assert!(u
        .candidates
        .iter()
        .any(|c| c.missing_software.contains(&"gromacs".to_string())));
    assert_eq!(env.auth.issued_count(), 0);
}

#[test]
fn unknown_goal_is_unresolved() {
    let env = env_with(fixture());
    let prompt = UserPromptSpec::new("x", vec![AbstractTask::new("t", "fold_protein", json!({}))]);
    let r = run_workflow(&prompt, &DeterministicPlanner, &env, &alice(), &RetryPolicy::default());
    assert_eq!(r.as_ref().err().map(WorkflowError::class), Some("UNRESOLVED_TASK"));
    assert_eq!(env.auth.issued_count(), 0);
}

#[test]
fn planner_failure_touches_nothing() {
    let env = env_with(fixture());
    let now = env.clock.now();
    let prompt = UserPromptSpec {
        prompt_text: "do science".into(),
        structured_goals: None,
    };
    let r = run_workflow(&prompt, &DeterministicPlanner, &env, &alice(), &RetryPolicy::default());
    assert_eq!(r.as_ref().err().map(WorkflowError::class), Some("PLANNER_FAILED"));
    assert_eq!(env.auth.issued_count(), 0);
    assert_eq!(env.clock.now(), now);
}

#[test]
fn retries_stop_at_the_policy_bound() {
    let mut f = fixture();
    f.faults.transfer_path_failures = 10;
    let env = env_with(f);
    let policy = RetryPolicy {
        max_attempts: 4,
        ..RetryPolicy::default()
    };
    let p = plan(&UserPromptSpec::new("x", vec![stage_task()]), &DeterministicPlanner).unwrap();
    let r = resolve(&p, &env.servers, &env.sites, None).unwrap();
    let out = execute(&r, &env, &alice(), &policy);
    assert_eq!(out.status, FinalStatus::Failed);
    assert_eq!(out.attempts("stage"), 4);
    let Some(WorkflowError::ExecFailed {
        attempts, error_class, ..
    }) = &out.error
    else {
        panic!("{:?}", out.error)
    };
    assert_eq!((*attempts, error_class.as_str()), (4, "TASK_FAILED"));
    let s = &summarize(&out.trace)[0];
    assert_eq!((s.authorizations, s.attempts, s.retries), (1, 4, 3));
    check_authorize_before_invoke(&out.trace).unwrap();
}

#[test]
fn non_retryable_class_fails_on_first_attempt() {
    let mut f = fixture();
    f.faults.transfer_path_failures = 1;
    let env = env_with(f);
    let policy = RetryPolicy {
        retryable_error_classes: Default::default(),
        ..RetryPolicy::default()
    };
    let prompt = UserPromptSpec::new("x", vec![stage_task()]);
    let out = run_workflow(&prompt, &DeterministicPlanner, &env, &alice(), &policy).unwrap();
    assert_eq!(out.attempts("stage"), 1);
    assert_eq!(out.status, FinalStatus::Failed);
}
