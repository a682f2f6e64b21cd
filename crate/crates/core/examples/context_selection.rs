//! Ingests query results into a bounded context set and picks the items
//! most relevant to a goal.

use arbor::context::ContextSet;
use arbor::prover::{GoalState, QueryEntry, QueryKind, QueryResult};

fn main() {
    let mut ctx = ContextSet::new(4);
    let result = QueryResult {
        entries: vec![
            QueryEntry { name: "Z.abs_eq".into(), statement: "0 <= n -> Z.abs n = n".into() },
            QueryEntry { name: "Z.abs_neq".into(), statement: "n <= 0 -> Z.abs n = - n".into() },
            QueryEntry { name: "Z.add_comm".into(), statement: "n + m = m + n".into() },
        ],
        raw: String::new(),
    };
    let added = ctx.ingest_query_result(QueryKind::Search, "Z.abs", &result, 1);
    println!("added {added}, holding {}/{}", ctx.len(), ctx.capacity());

    let more = QueryResult {
        entries: vec![
            QueryEntry { name: "Z.mul_comm".into(), statement: "n * m = m * n".into() },
            QueryEntry { name: "Z.abs_nonneg".into(), statement: "0 <= Z.abs n".into() },
        ],
        raw: String::new(),
    };
    ctx.ingest_query_result(QueryKind::Search, "Z", &more, 2);
    println!("after eviction: {:?}", ctx.items().iter().map(|i| &i.name).collect::<Vec<_>>());

    let goal = GoalState::new(vec![], "Z.abs i = 10");
    for item in ctx.select_for_prompt(&goal, 200) {
        println!("{}", item.render());
    }
}
