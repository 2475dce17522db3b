from fastapi import FastAPI, Request, status
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from src.routes import bound, homotopy, ideal, roots, split

app = FastAPI(title="polyshift")

origins = ["*"]

app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(ideal.router, prefix='/api')
app.include_router(bound.router, prefix='/api')
app.include_router(roots.router, prefix='/api')
app.include_router(homotopy.router, prefix='/api')
app.include_router(split.router, prefix='/api')


@app.exception_handler(RequestValidationError)
async def malformed_request(request: Request, exc: RequestValidationError):
    """
    Reports schema violations of the system document as 400 with field paths.

    :param request: The request.
    :type request: Request
    :param exc: The validation error.
    :type exc: RequestValidationError
    :return: ``{"detail": ["location: message", ...]}``.
    :rtype: JSONResponse
    """
    errors = [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()]
    return JSONResponse(status_code=status.HTTP_400_BAD_REQUEST, content={"detail": errors})


@app.get("/")
def root():
    """
    Root endpoint that returns a welcome message.
    :param: None
    :return: A dictionary with a welcome message.
    :rtype: dict
   """
    return {"message": "Polynomial perturbation bounds"}
