package org.owasp.benchmark.testcode;

import java.io.IOException;
import javax.servlet.ServletException;
import javax.servlet.annotation.WebServlet;
import javax.servlet.http.HttpServlet;
import javax.servlet.http.HttpServletRequest;
import javax.servlet.http.HttpServletResponse;

@WebServlet(value = "/weakrand-00/BenchmarkTest00031")
public class BenchmarkTest00031 extends HttpServlet {

    private static final long serialVersionUID = 1L;

    @Override
    public void doPost(HttpServletRequest request, HttpServletResponse response)
            throws ServletException, IOException {
        response.setContentType("text/html;charset=UTF-8");

        String param = request.getParameter("BenchmarkTest00031");
        if (param == null) param = "";

        String bar = param;

        try {
            java.security.SecureRandom rand = java.security.SecureRandom.getInstance("SHA1PRNG");
            int r = rand.nextInt();
        } catch (Exception e) {
            throw new ServletException(e);
        }
    }
}
