import textwrap
from shutil import get_terminal_size

from getconfig import settings, colors, logger

# add color for windows users that install colorama
#   It is not necessary to install colorama on most systems
try:
    import colorama

    colorama.init()
except ModuleNotFoundError:
    pass

termWidth = get_terminal_size()[0]
if termWidth < 5:
    logger.warning("Your detected terminal width is: " + str(termWidth))
    termWidth = 999999999


# ECMA-48 set graphics codes for the curious. Check out "man console_codes"
def colPrint(text, col="0", wrap=True, end=None):
    if wrap:
        width = settings.getint("text-wrap-width")
        width = 999999999 if width < 2 else width
        width = min(width, termWidth)
        text = textwrap.fill(text, width, replace_whitespace=False)
    print("\x1B[{}m{}\x1B[{}m".format(col, text, colors["default"]), end=end)
    return text.count('\n') + 1


def instructions():
    print('\033[' + colors["instructions"] + 'm' + 'contralocal lab: local search on max-cut and its contrastive reductions')
    print('The following commands are available as "python lab.py COMMAND ...":')
    print('  "reduce GRAPH TARGET --out FILE"   Compiles a max-cut graph into ctr1d, btw1d, btw1d-single, nbtw1d, btwd, ctrd or tree.')
    print('  "search INSTANCE --start START"    Runs local search from a cut bitstring file, a configuration file or "random".')
    print('  "encode-qp QP --out FILE"          Encodes a box QP as a triplet-loss instance plus a weight ledger.')
    print('  "kkt INSTANCE POINT --tol TOL"     Prints KKT residuals of a point.')
    print('  "experiment FILE.ini"              Runs the hard family and writes the summary table.')
    print('  "verify SUITE --seed S"            Runs a property suite: reductions, dynamics, decoding, trees, gradients, encoder.')
    print('The defaults come from config.ini:')
    print('      pivot-rule      Default: best | Current:', settings.get("pivot-rule"))
    print('      iteration-cap   Default: 5000000 | Current:', settings.getint("iteration-cap"))
    print('      kkt-tol         Default: 1e-6 | Current:', settings.getfloat("kkt-tol"))
    print('      pgd-maxit       Default: 100000 | Current:', settings.getint("pgd-maxit"))
    print('      seed            Default: 7 | Current:', settings.getint("seed"))
    print('      workers         Default: 1 | Current:', settings.getint("workers"))
    print('      log-level       Default: 30 | Current:', settings.getint("log-level"), '\033[39m')
