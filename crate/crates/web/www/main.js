import init, { solve, unify_avms, check_cnf } from "./pkg/featsat_web.js";

const $ = (id) => document.getElementById(id);

function show(target, json) {
  const v = JSON.parse(json);
  if (v.error) {
    $(target).textContent = "error: " + v.error;
    return v;
  }
  return v;
}

function solveFormula() {
  const v = show("solve-out", solve($("formula").value));
  if (v.error) return;
  const lines = [v.answer];
  if (v.avm) lines.push(v.avm, JSON.stringify(v.graph, null, 1));
  lines.push(`${v.applications} rule applications`);
  $("solve-out").textContent = lines.join("\n");
}

function unifyAvms() {
  const v = show("unify-out", unify_avms($("avm-a").value, $("avm-b").value));
  if (v.error) return;
  $("unify-out").textContent = v.unified ? v.avm : "FAIL";
}

function checkCnf() {
  const v = show("check-out", check_cnf($("cnf").value));
  if (v.error) return;
  const r = v.report;
  const lines = [
    `image: ${JSON.stringify(r.image)}`,
    `brute force: ${r.oracle_sat ? "satisfiable" : "unsatisfiable"}`,
    `grammar: ${r.recognizer_accepts ? "ACCEPT" : "REJECT"} after ${r.states_explored} states`,
    r.agree ? "verdicts agree" : "VERDICTS DISAGREE",
  ];
  if (r.derivation) lines.push(`certificate ${r.derivation}`);
  if (r.assignment) lines.push(`assignment ${JSON.stringify(r.assignment)}, satisfies: ${r.assignment_satisfies}`);
  for (const w of v.warnings) lines.push(`warning: ${w}`);
  $("check-out").textContent = lines.join("\n");
}

await init();
$("solve").addEventListener("click", solveFormula);
$("unify").addEventListener("click", unifyAvms);
$("check").addEventListener("click", checkCnf);
solveFormula();
unifyAvms();
checkCnf();
