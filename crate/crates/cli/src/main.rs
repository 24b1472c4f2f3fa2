//! `linkshare`: command-line front end for the policy ledger. Every
//! subcommand is a thin adapter over the core modules; structured output
//! is canonical JSON with sorted keys on stdout, diagnostics go to
//! stderr. Exit status: 0 success, 1 domain error, 2 usage or IO error.

mod state;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use linkshare_core::ledger::execute_transaction;
use linkshare_core::ontology::{parse_policy_document, RelationTriple};
use linkshare_core::query::{query_transaction, QueryOutcome};
use linkshare_core::reasoner::TransactionRequest;
use linkshare_core::simulator::{run_experiment, ExperimentConfig};
use linkshare_core::userbase::{
    cast_vote, propose_policy_change, tally_and_apply, ParticipantRole, PolicyChange,
    ProposalState,
};

use state::{CliError, Home};

#[derive(Parser)]
#[command(name = "linkshare", version, about = "Policy-enforced PII sharing ledger")]
struct Cli {
    /// Data directory holding policy, registry and chain files.
    #[arg(long, env = "LINKSHARE_HOME", default_value = ".", global = true)]
    home: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a policy document and persist it as the active policy.
    Ingest { policy: PathBuf },
    /// Add or remove a relation triple in the active policy.
    Relation {
        #[command(subcommand)]
        action: RelationAction,
    },
    /// Register a participant in the user base.
    Register {
        id: String,
        #[arg(long)]
        role: String,
    },
    /// Run a transaction request through the reasoner and the ledger.
    Transact {
        #[arg(long)]
        request: PathBuf,
    },
    /// Fetch a recorded transaction on behalf of a participant.
    Query {
        #[arg(long = "as")]
        requester: String,
        tx_id: String,
    },
    /// Check the integrity of the persisted chain.
    Verify,
    /// List the transactions that touched one owner's PII field.
    Datapoints {
        #[arg(long)]
        owner: String,
        field: String,
    },
    /// Open a consensus proposal for a policy change.
    Propose {
        #[arg(long)]
        id: String,
        #[arg(long = "as")]
        proposer: String,
        #[arg(long)]
        change: PathBuf,
    },
    /// Vote on an open proposal.
    Vote {
        #[arg(long)]
        id: String,
        #[arg(long = "as")]
        voter: String,
        #[arg(long)]
        decision: String,
    },
    /// Tally a proposal and apply the change on a strict majority.
    Tally {
        #[arg(long)]
        id: String,
    },
    /// Run the deterministic simulation harness.
    Simulate(SimulateArgs),
}

#[derive(Subcommand)]
enum RelationAction {
    Add(RelationArgs),
    Rm(RelationArgs),
}

#[derive(Args)]
struct RelationArgs {
    #[arg(long)]
    actor: String,
    subject: String,
    property: String,
    object: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    nodes: u32,
    #[arg(long, default_value_t = 100)]
    duration: u64,
    #[arg(long, default_value_t = 10)]
    query_period: u64,
    #[arg(long, default_value_t = 0.3)]
    violation_rate: f64,
    /// Persist the simulated chain to this file.
    #[arg(long)]
    chain_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let home = Home::new(cli.home);
    match run(&home, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(home: &Home, command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { policy } => {
            let bytes = state::read_file(&policy)?;
            let tree = parse_policy_document(&bytes).map_err(CliError::domain)?;
            home.save_policy(&tree)?;
            let counts: BTreeMap<&str, u64> = BTreeMap::from([
                ("classes", tree.classes().count() as u64),
                ("individuals", tree.individuals().count() as u64),
                ("properties", tree.properties().count() as u64),
                ("triples", tree.triples().count() as u64),
                ("version", tree.version()),
            ]);
            println!("{}", state::json_object_u64(&counts));
            Ok(())
        }
        Command::Relation { action } => {
            let mut tree = home.load_policy()?;
            let (verb, args) = match &action {
                RelationAction::Add(a) => ("add", a),
                RelationAction::Rm(a) => ("rm", a),
            };
            let result = match verb {
                "add" => tree.assert_relation(&args.actor, &args.subject, &args.property, &args.object),
                _ => tree.retract_relation(
                    &args.actor,
                    &RelationTriple::new(
                        args.subject.clone(),
                        args.property.clone(),
                        args.object.clone(),
                    ),
                ),
            };
            result.map_err(CliError::domain)?;
            home.save_policy(&tree)?;
            let counts: BTreeMap<&str, u64> = BTreeMap::from([
                ("triples", tree.triples().count() as u64),
                ("version", tree.version()),
            ]);
            println!("{}", state::json_object_u64(&counts));
            Ok(())
        }
        Command::Register { id, role } => {
            let role = ParticipantRole::from_str(&role)
                .ok_or_else(|| CliError::Domain(format!("unknown role {role:?}")))?;
            let mut userbase = home.load_userbase()?;
            userbase.register(&id, role).map_err(CliError::domain)?;
            // The participant also becomes an ontology individual of the
            // matching class so relations and queries can reference it.
            let mut tree = home.load_policy()?;
            let class = match role {
                ParticipantRole::ServiceProvider => "Service_Provider",
                ParticipantRole::EndUser => "End_User",
                ParticipantRole::TrustedThirdParty => "Trusted_Third_Party",
            };
            tree.add_individual(&id, class).map_err(CliError::domain)?;
            home.save_policy(&tree)?;
            home.append_participant(&id, role)?;
            println!(
                "{{\"id\":{},\"role\":{}}}",
                state::json_str(&id),
                state::json_str(role.as_str())
            );
            Ok(())
        }
        Command::Transact { request } => {
            let bytes = state::read_file(&request)?;
            let request: TransactionRequest = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Domain(format!("bad request JSON: {e}")))?;
            request.validate().map_err(CliError::domain)?;
            let tree = home.load_policy()?;
            let mut chain = home.load_chain()?;
            let now = chain.tip().timestamp + 1;
            let (verdict, block) =
                execute_transaction(&tree, &mut chain, &request, now).map_err(CliError::domain)?;
            let block = block.clone();
            home.append_chain_block(&block)?;
            home.append_transaction(&request)?;
            let mut out = String::from("{");
            out.push_str(&format!("\"block_hash\":{}", state::json_str(&block.block_hash)));
            if let Some(code) = &verdict.error {
                out.push_str(&format!(",\"error_code\":{}", state::json_str(code.as_str())));
            }
            if let Some(field) = &verdict.failing_field {
                out.push_str(&format!(",\"failing_field\":{}", state::json_str(field)));
            }
            out.push_str(&format!(",\"height\":{}", block.height));
            out.push_str(&format!(",\"status\":{}", state::json_str(block.status.as_str())));
            out.push_str(&format!(",\"tx_id\":{}}}", state::json_str(&block.tx_id)));
            println!("{out}");
            if verdict.is_pass() {
                Ok(())
            } else {
                Err(CliError::Domain(format!(
                    "transaction {} failed: {}",
                    block.tx_id, block.error_code
                )))
            }
        }
        Command::Query { requester, tx_id } => {
            let tree = home.load_policy()?;
            let userbase = home.load_userbase()?;
            let chain = home.load_chain()?;
            let result = query_transaction(&chain, &tree, &userbase, &requester, &tx_id)
                .map_err(CliError::domain)?;
            println!("{}", result.to_json());
            match result.outcome {
                QueryOutcome::Full | QueryOutcome::MetadataOnly => Ok(()),
                QueryOutcome::Denied => Err(CliError::Domain(format!(
                    "access to {tx_id} denied for {requester}"
                ))),
                QueryOutcome::NotFound => {
                    Err(CliError::Domain(format!("transaction {tx_id} not found")))
                }
            }
        }
        Command::Verify => {
            let report = home.verify_chain()?;
            let height = report
                .first_bad_height
                .map(|h| h.to_string())
                .unwrap_or_else(|| "null".to_string());
            println!(
                "{{\"first_bad_height\":{},\"ok\":{},\"reason\":{}}}",
                height,
                report.ok,
                state::json_str(&report.reason)
            );
            if report.ok {
                Ok(())
            } else {
                Err(CliError::Domain(format!(
                    "chain integrity failure at height {height}: {}",
                    report.reason
                )))
            }
        }
        Command::Datapoints { owner, field } => {
            let chain = home.load_chain()?;
            let txs = chain.datapoint_chain(&owner, &field);
            let list: Vec<String> = txs.iter().map(|t| state::json_str(t)).collect();
            println!(
                "{{\"field\":{},\"owner\":{},\"transactions\":[{}]}}",
                state::json_str(&field),
                state::json_str(&owner),
                list.join(",")
            );
            Ok(())
        }
        Command::Propose { id, proposer, change } => {
            let bytes = state::read_file(&change)?;
            let change: PolicyChange = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Domain(format!("bad change JSON: {e}")))?;
            let userbase = home.load_userbase()?;
            let mut proposals = home.load_proposals()?;
            if proposals.contains_key(&id) {
                return Err(CliError::Domain(format!("proposal {id} already exists")));
            }
            let proposal =
                propose_policy_change(&userbase, &id, &proposer, change).map_err(CliError::domain)?;
            println!("{}", state::proposal_json(&proposal));
            proposals.insert(id, proposal);
            home.save_proposals(&proposals)?;
            Ok(())
        }
        Command::Vote { id, voter, decision } => {
            let decision = match decision.as_str() {
                "yes" => true,
                "no" => false,
                other => {
                    return Err(CliError::Domain(format!(
                        "decision must be yes or no, got {other:?}"
                    )))
                }
            };
            let userbase = home.load_userbase()?;
            let mut proposals = home.load_proposals()?;
            let proposal = proposals
                .get_mut(&id)
                .ok_or_else(|| CliError::Domain(format!("unknown proposal {id}")))?;
            cast_vote(&userbase, proposal, &voter, decision).map_err(CliError::domain)?;
            println!("{}", state::proposal_json(proposal));
            home.save_proposals(&proposals)?;
            Ok(())
        }
        Command::Tally { id } => {
            let userbase = home.load_userbase()?;
            let mut proposals = home.load_proposals()?;
            let mut tree = home.load_policy()?;
            let proposal = proposals
                .get_mut(&id)
                .ok_or_else(|| CliError::Domain(format!("unknown proposal {id}")))?;
            tally_and_apply(&userbase, proposal, &mut tree).map_err(CliError::domain)?;
            if proposal.state == ProposalState::Applied {
                home.save_policy(&tree)?;
            }
            println!("{}", state::proposal_json(proposal));
            home.save_proposals(&proposals)?;
            Ok(())
        }
        Command::Simulate(args) => {
            let config = ExperimentConfig {
                node_count: args.nodes,
                duration: args.duration,
                query_period: args.query_period,
                violation_rate: args.violation_rate,
                seed: args.seed,
                ..ExperimentConfig::default()
            };
            let (report, chain) = run_experiment(&config).map_err(CliError::domain)?;
            if let Some(path) = &args.chain_out {
                linkshare_core::ledger::save_chain(path, &chain)
                    .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            }
            eprint!("{}", report.to_table());
            println!("{}", report.to_json());
            Ok(())
        }
    }
}
