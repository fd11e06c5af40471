#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "hetrel/cli.hpp"
#include "hetrel/synthetic.hpp"

using namespace hetrel;
using fixtures::read_text;
using fixtures::ScratchDir;
using fixtures::write_text;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Planted toy on disk, small enough for quick training runs.
struct ToyFiles {
  ScratchDir dir{"cli"};
  std::string nodes = (dir / "nodes.tsv").string();
  std::string edges = (dir / "edges.tsv").string();

  ToyFiles() {
    PlantedToyOptions o;
    o.papers = 24;
    o.authors = 16;
    o.subjects = 8;
    o.venues = 8;
    o.seed = 3;
    write_graph(planted_toy(o), nodes, edges);
  }

  std::vector<std::string> train(const std::string& model, const std::string& seed = "0") const {
    return {"train", "--nodes", nodes, "--edges", edges, "--out", model, "--seed", seed, "--dim", "16",
            "-K", "2", "--epochs", "40", "--quiet"};
  }
};

void write_triangle(const ScratchDir& dir) {
  write_text(dir / "n.tsv", "a\tN\t-\nb\tN\t-\nc\tN\t-\n");
  write_text(dir / "e.tsv", "a\tr\tb\nb\tr\tc\na\tr\tc\n");
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  ScratchDir dir("cli");
  write_triangle(dir);
  const auto n = (dir / "n.tsv").string(), e = (dir / "e.tsv").string();
  CHECK(cli({"train", "--nodes", n, "--out", (dir / "m.bin").string()}).code == kExitUsage);
  CHECK(cli({"measure", "--method", "hetesim", "--nodes", n, "--edges", e}).code == kExitUsage);
  CHECK(cli({"measure", "--method", "bogus", "--nodes", n, "--edges", e}).code == kExitUsage);
  CHECK(cli({"measure", "--method", "prw", "--k", "3", "--nodes", n, "--edges", e}).code == kExitUsage);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"train", "--nodes", n, "--edges", e, "--lr", "fast"}).code == kExitUsage);
}

TEST_CASE("data errors exit 3") {
  ScratchDir dir("cli");
  write_triangle(dir);
  const auto n = (dir / "n.tsv").string(), e = (dir / "e.tsv").string();
  CHECK(cli({"measure", "--method", "prw", "--k", "2", "--pairs", "a,zz", "--nodes", n, "--edges", e}).code == kExitData);
  CHECK(cli({"measure", "--method", "simrank", "--nodes", n, "--edges", (dir / "none.tsv").string()}).code ==
        kExitData);
}

TEST_CASE("measure commands") {
  ScratchDir dir("cli");
  write_triangle(dir);
  const auto n = (dir / "n.tsv").string(), e = (dir / "e.tsv").string();
  const auto prw = cli({"measure", "--method", "prw", "--k", "2", "--pairs", "a,b", "--nodes", n, "--edges", e});
  CHECK(prw.code == kExitOk);
  CHECK(prw.out == "src\tdst\tscore\na\tb\t0.250000\n");

  const auto bib = fixtures::two_authors();
  write_graph(bib, dir / "bn.tsv", dir / "be.tsv");
  const auto hs = cli({"measure", "--method", "hetesim", "--metapath", "A-writes-P-writes^-1-A", "--pairs",
                       "a1,a1;a1,a2", "--nodes", (dir / "bn.tsv").string(), "--edges", (dir / "be.tsv").string()});
  CHECK(hs.code == kExitOk);
  CHECK(hs.out == "src\tdst\tscore\na1\ta1\t1.000000\na1\ta2\t0.707107\n");

  const auto bad_path = cli({"measure", "--method", "hetesim", "--metapath", "A-writes-A", "--nodes",
                             (dir / "bn.tsv").string(), "--edges", (dir / "be.tsv").string()});
  CHECK(bad_path.code == kExitData);

  const auto sim = cli({"measure", "--method", "simrank", "--nodes", n, "--edges", e});
  CHECK(sim.code == kExitOk);
  CHECK(sim.out.rfind("node,a,b,c\n", 0) == 0);
}

TEST_CASE("train, search and cluster") {
  ToyFiles toy;
  const auto model = (toy.dir / "m.bin").string();
  const auto trained = cli(toy.train(model));
  REQUIRE(trained.code == kExitOk);
  CHECK(std::filesystem::exists(model));
  const auto log = read_text(model + ".metrics.tsv");
  CHECK(log.rfind("epoch\tloss", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') >= 41);

  const auto graph = std::vector<std::string>{"--nodes", toy.nodes, "--edges", toy.edges, "--model", model};
  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), graph.begin(), graph.end());
    return cli(head);
  };
  const auto search = with({"search", "--query", "a3", "--top", "5"});
  REQUIRE(search.code == kExitOk);
  std::istringstream rows(search.out);
  std::string header, first;
  std::getline(rows, header);
  std::getline(rows, first);
  CHECK(header == "rank\tnode_id\tscore\tlabel");
  CHECK(first.rfind("1\ta3\t", 0) == 0);
  CHECK(search.out.find("# recall@5\t") != std::string::npos);

  const auto typed = with({"search", "--query", "a3", "--top", "100", "--type", "V"});
  CHECK(typed.code == kExitOk);
  CHECK(typed.err.find("warning") != std::string::npos);
  std::istringstream typed_rows(typed.out);
  std::string line;
  std::getline(typed_rows, line);
  while (std::getline(typed_rows, line))
    if (line[0] != '#') CHECK(line.find("\tv") != std::string::npos);

  CHECK(with({"search", "--query", "nobody"}).code == kExitData);
  CHECK(with({"search", "--query", "a3", "--top", "0"}).code == kExitUsage);

  const auto clustered = with({"cluster", "--k", "2", "--metrics"});
  CHECK(clustered.code == kExitOk);
  CHECK(clustered.out.rfind("node_id\tcluster\n", 0) == 0);
  CHECK(clustered.out.find("# NMI\t") != std::string::npos);
  CHECK(with({"cluster", "--k", "1000"}).code == kExitUsage);

  const auto gsim = with({"measure", "--method", "gsim", "--pairs", "a1,a2"});
  CHECK(gsim.code == kExitOk);

  // A model does not fit a different graph.
  ScratchDir other("cli");
  write_triangle(other);
  CHECK(cli({"search", "--nodes", (other / "n.tsv").string(), "--edges", (other / "e.tsv").string(), "--model", model,
             "--query", "a"})
            .code == kExitData);
}

TEST_CASE("cluster a matrix file") {
  ScratchDir dir("cli");
  write_triangle(dir);
  const auto n = (dir / "n.tsv").string(), e = (dir / "e.tsv").string();
  const auto m = (dir / "m.csv").string();
  REQUIRE(cli({"measure", "--method", "simrank", "--nodes", n, "--edges", e, "--out", m}).code == kExitOk);
  const auto r = cli({"cluster", "--matrix", m, "--k", "2", "--metrics", "--nodes", n, "--edges", e});
  CHECK(r.code == kExitOk);
  CHECK(r.err.find("no labeled nodes") != std::string::npos);
  CHECK(cli({"cluster", "--matrix", m, "--k", "4", "--nodes", n, "--edges", e}).code == kExitUsage);
}

TEST_CASE("config file with flag override") {
  ToyFiles toy;
  const auto a = (toy.dir / "a.bin").string(), b = (toy.dir / "b.bin").string();
  write_text(toy.dir / "run.cfg", "# run\ndim = 16\nmax_length = 2\nmax_epochs = 5\nseed = 9\n");
  const auto cfg = (toy.dir / "run.cfg").string();
  REQUIRE(cli({"train", "--config", cfg, "--nodes", toy.nodes, "--edges", toy.edges, "--out", a, "--quiet"}).code ==
          kExitOk);
  REQUIRE(cli({"train", "--config", cfg, "--nodes", toy.nodes, "--edges", toy.edges, "--out", b, "--seed", "9",
               "--quiet"})
              .code == kExitOk);
  CHECK(read_text(a) == read_text(b));
  REQUIRE(cli({"train", "--config", cfg, "--nodes", toy.nodes, "--edges", toy.edges, "--out", b, "--seed", "1",
               "--quiet"})
              .code == kExitOk);
  CHECK(read_text(a) != read_text(b));

  write_text(toy.dir / "bad.cfg", "dimension = 16\n");
  CHECK(cli({"train", "--config", (toy.dir / "bad.cfg").string(), "--nodes", toy.nodes, "--edges", toy.edges, "--out",
             a})
            .code == kExitUsage);
}

TEST_CASE("same seed gives identical files") {
  ToyFiles toy;
  const auto a = (toy.dir / "a.bin").string(), b = (toy.dir / "b.bin").string();
  REQUIRE(cli(toy.train(a)).code == kExitOk);
  REQUIRE(cli(toy.train(b)).code == kExitOk);
  CHECK(read_text(a) == read_text(b));
  CHECK(read_text(a + ".metrics.tsv") == read_text(b + ".metrics.tsv"));
  const auto c = (toy.dir / "c.bin").string();
  REQUIRE(cli(toy.train(c, "1")).code == kExitOk);
  CHECK(read_text(a) != read_text(c));
}

TEST_CASE("verify command") {
  const auto one = cli({"verify", "--theorem", "1", "--trials", "10", "--max-nodes", "10"});
  CHECK(one.code == kExitOk);
  CHECK(one.out.rfind("theorem 1: PASS", 0) == 0);
  CHECK(cli({"verify", "--theorem", "2", "--trials", "5"}).code == kExitOk);
  CHECK(cli({"verify", "--theorem", "3"}).code == kExitOk);
  CHECK(cli({"verify", "--theorem", "1", "--max-nodes", "40"}).code == kExitUsage);
  CHECK(cli({"verify", "--theorem", "7"}).code == kExitUsage);
}

TEST_CASE("installed binary reports exit codes") {
  const std::string binary = HETREL_CLI_PATH;
  ScratchDir dir("cli");
  const auto quiet = " >" + (dir / "o.txt").string() + " 2>&1";
  const int ok = std::system((binary + " verify --theorem 3 --max-nodes 10" + quiet).c_str());
  CHECK(WEXITSTATUS(ok) == kExitOk);
  const int usage = std::system((binary + " train" + quiet).c_str());
  CHECK(WEXITSTATUS(usage) == kExitUsage);
}
