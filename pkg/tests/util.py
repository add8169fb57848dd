"""Shared helpers and fixture programs for the test suite."""

from importlib import resources

from scoopbench import lang
from scoopbench.cfg import build_cfg
from scoopbench.explorer import explore


def compile_src(source: str):
    return build_cfg(lang.validate(lang.parse(source)))


def corpus_source(name: str) -> str:
    return (resources.files("scoopbench") / "corpus" / f"{name}.mini").read_text()


def compile_corpus(name: str):
    return compile_src(corpus_source(name))


def explore_src(source: str, model="rq", **kw):
    return explore(compile_src(source), model, **kw)


MICRO_TWO_COMMANDS = """
class Counter
  attribute n : INTEGER
  command inc do n := n + 1 end
end

root
  create separate s : Counter
  separate s do
    s.inc()
    s.inc()
  end
end
"""

MICRO_TWO_CLIENTS = """
class Counter
  attribute n : INTEGER
  command inc do n := n + 1 end
end

class Poker
  command poke(target : separate Counter)
  do
    separate target do
      target.inc()
      target.inc()
    end
  end
end

root
  create separate counter : Counter
  create separate poker1 : Poker
  create separate poker2 : Poker
  separate poker1, poker2 do
    poker1.poke(counter)
    poker2.poke(counter)
  end
end
"""

MICRO_QUERY_IF = """
class Cell
  attribute v : INTEGER
  command put(x : INTEGER)
  do
    v := x
  end
  query get() : INTEGER
  do
    result := v
  end
end

root
  create separate cell : Cell
  separate cell do
    cell.put(3)
    if cell.get() = 3 then
    end
  end
end
"""

MICRO_PROGRAMS = {
    "micro_two_commands": MICRO_TWO_COMMANDS,
    "micro_two_clients": MICRO_TWO_CLIENTS,
    "micro_query_if": MICRO_QUERY_IF,
}

MUTUAL_QUERY = """
class Peer
  attribute seen : INTEGER
  query ping() : INTEGER
  do
    result := 1
  end
  command meet(other : separate Peer)
  do
    separate other do
      seen := other.ping()
    end
  end
end

root
  create separate peer1 : Peer
  create separate peer2 : Peer
  separate peer1, peer2 do
    peer1.meet(peer2)
    peer2.meet(peer1)
  end
end
"""

SUBQUEUE_CYCLE = """
class Cell
  attribute v : INTEGER
  query get() : INTEGER do result := v end
end

class Blocker
  attribute x : INTEGER
  command run(cell : separate Cell, partner : separate Prober)
  do
    separate cell do
      separate partner do
        x := partner.probe()
      end
    end
  end
end

class Prober
  attribute y : INTEGER
  query probe() : INTEGER do result := 1 end
  command run(cell : separate Cell)
  do
    separate cell do
      y := cell.get()
    end
  end
end

root
  create separate cell : Cell
  create separate blocker : Blocker
  create separate prober : Prober
  separate blocker, prober do
    blocker.run(cell, prober)
    prober.run(cell)
  end
end
"""

REQUIRE_FALSE = """
class Cell
  attribute v : INTEGER
end

root
  create separate cell : Cell
  separate cell require false do
  end
end
"""

NULL_TARGET = """
class Node
  attribute twin : Node
  query mirror() : Node
  do
    result := twin
  end
  command touch
  do
  end
end

class Helper
  command poke(target : Node)
  do
    target.touch()
  end
end

root
  create node : Node
  create helper : Helper
  helper.poke(node.mirror())
end
"""

DISJOINT_RESERVATIONS = """
class Counter
  attribute n : INTEGER
  command inc do n := n + 1 end
end

class Worker
  command hit(target : separate Counter)
  do
    separate target do
      target.inc()
    end
  end
end

root
  create separate counter1 : Counter
  create separate counter2 : Counter
  create separate worker1 : Worker
  create separate worker2 : Worker
  separate worker1, worker2 do
    worker1.hit(counter1)
    worker2.hit(counter2)
  end
end
"""
