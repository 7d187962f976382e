from . import utils

EXTENSION = "c"

# _PyCFunctionFast and PyCFunction signatures differ; both compilers warn about the cast
C_PREAMBLE = """
#if defined(_MSC_VER)
#pragma warning(disable: 4113)
#endif

#if defined(__GNUC__) || defined(__clang__)
#pragma GCC diagnostic ignored "-Wincompatible-pointer-types"
#endif

#define PY_SSIZE_T_CLEAN
#include <Python.h>
"""

MODULE_TEMPLATE = """
static PyMethodDef methods[] = {{
    {{ "{func_name}", (PyCFunction){func_name}_wrapper, {flags}, NULL }},
    {{ NULL, NULL, 0, NULL }}
}};

static struct PyModuleDef module = {{ PyModuleDef_HEAD_INIT, "{module_name}", NULL, -1, methods }};

PyMODINIT_FUNC PyInit_{module_name}(void) {{
    {init}
    return PyModule_Create(&module);
}}
"""

DEFAULT_FUNCTION_TEMPLATE = """
{preamble}

{code}

static PyObject* {func_name}_wrapper(PyObject *self, PyObject *const *args, Py_ssize_t nargs) {{
    if (nargs != 1) {{
        PyErr_SetString(PyExc_TypeError, "{func_name} takes exactly one replica index");
        return NULL;
    }}
    double replica = PyFloat_AsDouble(args[0]);
    if (replica == -1.0 && PyErr_Occurred())
        return NULL;
    return PyFloat_FromDouble({func_name}(replica));
}}
"""

NUMPY_BATCH_FUNCTION_TEMPLATE = """
{preamble}

#define NPY_NO_DEPRECATED_API NPY_1_7_API_VERSION
#include <numpy/arrayobject.h>

{code}

static PyObject* {func_name}_wrapper(PyObject *self, PyObject *arg) {{
    PyArrayObject *arr = (PyArrayObject *)PyArray_FROMANY(arg, NPY_DOUBLE, 1, 1, NPY_ARRAY_IN_ARRAY);
    if (!arr)
        return NULL;

    npy_intp rows = PyArray_DIM(arr, 0);
    PyObject *out = PyArray_SimpleNew(1, &rows, NPY_DOUBLE);
    if (!out) {{
        Py_DECREF(arr);
        return NULL;
    }}

    const double *replicas = (const double *)PyArray_DATA(arr);
    double *outcomes = (double *)PyArray_DATA((PyArrayObject *)out);

    npy_intp i;
    Py_BEGIN_ALLOW_THREADS
    #pragma omp parallel for schedule(dynamic, 256)
    for (i = 0; i < rows; i++)
        outcomes[i] = {func_name}(replicas[i]);
    Py_END_ALLOW_THREADS

    Py_DECREF(arr);
    return out;
}}
"""


def _check(code: str, func_name: str) -> None:
    if utils.count_params(code, func_name) != 1:
        raise ValueError(f"kernel {func_name} must take a single double replica index")


def default_wrapper(code: str, func_name: str, module_name: str) -> tuple[str, str]:
    _check(code, func_name)
    code = DEFAULT_FUNCTION_TEMPLATE.format(preamble=C_PREAMBLE, code=code, func_name=func_name)
    code += MODULE_TEMPLATE.format(func_name=func_name, module_name=module_name, flags="METH_FASTCALL", init="")
    return code, func_name


def batch_wrapper_numpy(code: str, func_name: str, module_name: str) -> tuple[str, str]:
    _check(code, func_name)
    code = NUMPY_BATCH_FUNCTION_TEMPLATE.format(preamble=C_PREAMBLE, code=code, func_name=func_name)
    code += MODULE_TEMPLATE.format(func_name=func_name, module_name=module_name, flags="METH_O", init="import_array();")
    return code, func_name
